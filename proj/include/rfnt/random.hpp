#pragma once

#include <cstdint>
#include <random>

namespace rfnt {

/// Generator used everywhere in the library. Seeded explicitly per call;
/// there is no global generator.
using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of sub-stream `index` of `master`.
///
/// Stream splitting rule: task i of a sweep with master seed m draws from
/// derive_seed(m, i); inside a task, named purposes (weights, training
/// points, ...) split again with derive_seed(task_seed, Stream::...). The
/// mapping depends only on (master, index), so results do not depend on
/// scheduling or thread count.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(master ^ mix64(index));
}

enum class Stream : std::uint64_t {
  weights = 0x1001,
  train = 0x1002,
  test = 0x1003,
  noise = 0x1004,
  population = 0x1005,
  restart = 0x1006,
  projection = 0x1007,
};

constexpr std::uint64_t derive_seed(std::uint64_t master, Stream s) noexcept {
  return derive_seed(master, static_cast<std::uint64_t>(s));
}

}  // namespace rfnt
