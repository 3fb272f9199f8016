#pragma once

// Target functions on S^{d-1}(sqrt d) together with whatever is known in
// closed form about their harmonic decomposition.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "rfnt/activation.hpp"
#include "rfnt/spectrum.hpp"

namespace rfnt {

/// Maps an n x d matrix of points (one per row) to n values.
using BatchFunction = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

struct TargetFunction {
  std::string name;
  int d = 0;
  BatchFunction eval;

  /// ||P_k f||^2 for every degree k where it is nonzero. Complete when
  /// `energies_complete` is set; otherwise absent or partial.
  std::map<int, double> energies;
  bool energies_complete = false;

  /// P_k f as functions, for every degree where it is nonzero. Complete when
  /// `parts_complete` is set.
  std::map<int, BatchFunction> parts;
  bool parts_complete = false;

  Eigen::VectorXd operator()(const Eigen::MatrixXd& x) const { return eval(x); }

  /// E[f^2], when known exactly.
  std::optional<double> norm2() const {
    if (!energies_complete) return std::nullopt;
    double acc = 0.0;
    for (const auto& [k, e] : energies) acc += e;
    return acc;
  }

  /// ||P_{>l} f||^2, when known exactly.
  std::optional<double> plateau(int l) const {
    if (!energies_complete) return std::nullopt;
    double acc = 0.0;
    for (const auto& [k, e] : energies) {
      if (k > l) acc += e;
    }
    return acc;
  }

  /// ||P_{<=l} f||^2, when known exactly.
  std::optional<double> low_energy(int l) const {
    if (!energies_complete) return std::nullopt;
    double acc = 0.0;
    for (const auto& [k, e] : energies) {
      if (k <= l) acc += e;
    }
    return acc;
  }

  /// P_{<=l} f as a target of its own.
  TargetFunction low_degree_part(int l) const {
    if (!parts_complete) throw std::logic_error("target '" + name + "' has no closed-form harmonic parts");
    TargetFunction out;
    out.name = name + "_le" + std::to_string(l);
    out.d = d;
    std::vector<BatchFunction> keep;
    for (const auto& [k, p] : parts) {
      if (k <= l) {
        out.parts.emplace(k, p);
        keep.push_back(p);
      }
    }
    for (const auto& [k, e] : energies) {
      if (k <= l) out.energies.emplace(k, e);
    }
    out.energies_complete = energies_complete;
    out.parts_complete = true;
    out.eval = [keep](const Eigen::MatrixXd& x) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(x.rows());
      for (const auto& p : keep) v += p(x);
      return v;
    };
    return out;
  }
};

namespace detail {

inline void check_target_dim(int d) {
  if (d < 2) throw std::invalid_argument("target dimension must be >= 2");
}

}  // namespace detail

/// f(x) = sum_{i < floor(d/2)} x_i^2 - sum_{i >= floor(d/2)} x_i^2.
inline TargetFunction quad_split(int d) {
  detail::check_target_dim(d);
  const int h = d / 2;
  TargetFunction f;
  f.name = "quad_split";
  f.d = d;
  f.eval = [h, d](const Eigen::MatrixXd& x) -> Eigen::VectorXd {
    return x.leftCols(h).rowwise().squaredNorm() - x.rightCols(d - h).rowwise().squaredNorm();
  };
  const double dd = d;
  if (d % 2 == 0) {
    f.energies = {{2, 2.0 * dd * dd / (dd + 2.0)}};
    f.parts = {{2, f.eval}};
  } else {
    // Mean -1 (one more negative coordinate), the rest is a degree-2 harmonic.
    f.energies = {{0, 1.0}, {2, 2.0 * (dd * dd - 1.0) / (dd + 2.0)}};
    auto ev = f.eval;
    f.parts = {{0, [](const Eigen::MatrixXd& x) -> Eigen::VectorXd { return Eigen::VectorXd::Constant(x.rows(), -1.0); }},
               {2, [ev](const Eigen::MatrixXd& x) -> Eigen::VectorXd { return ev(x).array() + 1.0; }}};
  }
  f.energies_complete = f.parts_complete = true;
  return f;
}

/// f(x) = sum_i (x_i^3 - 3 x_i).
inline TargetFunction cubic_hermite(int d) {
  detail::check_target_dim(d);
  TargetFunction f;
  f.name = "cubic_hermite";
  f.d = d;
  f.eval = [](const Eigen::MatrixXd& x) -> Eigen::VectorXd {
    return (x.array().cube() - 3.0 * x.array()).rowwise().sum();
  };
  const double dd = d;
  // Projection on x_i is E[x_i^4] - 3 = -6/(d+2) per coordinate.
  const double c1 = -6.0 / (dd + 2.0);
  const double total = dd * (15.0 * dd * dd / ((dd + 2.0) * (dd + 4.0)) - 18.0 * dd / (dd + 2.0) + 9.0);
  const double e1 = c1 * c1 * dd;
  f.energies = {{1, e1}, {3, total - e1}};
  auto ev = f.eval;
  f.parts = {{1, [c1](const Eigen::MatrixXd& x) -> Eigen::VectorXd { return c1 * x.rowwise().sum(); }},
             {3, [ev, c1](const Eigen::MatrixXd& x) -> Eigen::VectorXd { return ev(x) - c1 * x.rowwise().sum(); }}};
  f.energies_complete = f.parts_complete = true;
  return f;
}

/// f(x) = x_i.
inline TargetFunction coordinate(int d, int i = 0) {
  detail::check_target_dim(d);
  if (i < 0 || i >= d) throw std::out_of_range("coordinate index out of range");
  TargetFunction f;
  f.name = "coordinate";
  f.d = d;
  f.eval = [i](const Eigen::MatrixXd& x) -> Eigen::VectorXd { return x.col(i); };
  f.energies = {{1, 1.0}};
  f.parts = {{1, f.eval}};
  f.energies_complete = f.parts_complete = true;
  return f;
}

/// f(x) = sum_i x_i.
inline TargetFunction coordinate_sum(int d) {
  detail::check_target_dim(d);
  TargetFunction f;
  f.name = "coordinate_sum";
  f.d = d;
  f.eval = [](const Eigen::MatrixXd& x) -> Eigen::VectorXd { return x.rowwise().sum(); };
  f.energies = {{1, static_cast<double>(d)}};
  f.parts = {{1, f.eval}};
  f.energies_complete = f.parts_complete = true;
  return f;
}

/// f(x) = sigma(<w, x>) with w on the unit sphere. Degree parts up to K come
/// from the activation's Gegenbauer coefficients; energies past K are lumped
/// into the remainder and the decomposition is marked incomplete.
inline TargetFunction single_neuron(const ActivationSpec& sigma, const Eigen::VectorXd& w, int K = default_truncation) {
  const int d = static_cast<int>(w.size());
  detail::check_target_dim(d);
  const Eigen::VectorXd wn = w.normalized();
  TargetFunction f;
  f.name = "single_neuron";
  f.d = d;
  f.eval = [sigma, wn](const Eigen::MatrixXd& x) -> Eigen::VectorXd {
    Eigen::MatrixXd a = x * wn;
    sigma.apply(a);
    return a.col(0);
  };
  const auto lambda = activation_gegenbauer_coeffs(sigma, d, K);
  for (int k = 0; k <= K; ++k) {
    const double b = dim_harmonics_value(d, k);
    const double e = lambda[k] * lambda[k] * b;
    if (e == 0.0) continue;
    f.energies.emplace(k, e);
    const double scale = lambda[k] * b;
    f.parts.emplace(k, [wn, k, d, scale](const Eigen::MatrixXd& x) -> Eigen::VectorXd {
      const GegenbauerEvaluator q(d, k);
      const Eigen::VectorXd t = std::sqrt(static_cast<double>(d)) * (x * wn);
      Eigen::VectorXd v(x.rows());
      for (Eigen::Index i = 0; i < x.rows(); ++i) v[i] = scale * q.evaluate_unchecked(k, std::clamp(t[i], -1.0 * d, 1.0 * d));
      return v;
    });
  }
  return f;
}

inline TargetFunction custom_target(std::string name, int d, BatchFunction eval) {
  detail::check_target_dim(d);
  TargetFunction f;
  f.name = std::move(name);
  f.d = d;
  f.eval = std::move(eval);
  return f;
}

/// Sum of two targets. Harmonic parts add degree by degree; energies are kept
/// only when the degree supports are disjoint, since cross terms are not known.
inline TargetFunction operator+(const TargetFunction& a, const TargetFunction& b) {
  if (a.d != b.d) throw std::invalid_argument("cannot add targets of different dimension");
  TargetFunction f;
  f.name = a.name + "+" + b.name;
  f.d = a.d;
  auto ea = a.eval, eb = b.eval;
  f.eval = [ea, eb](const Eigen::MatrixXd& x) -> Eigen::VectorXd { return ea(x) + eb(x); };

  f.parts = a.parts;
  for (const auto& [k, p] : b.parts) {
    auto it = f.parts.find(k);
    if (it == f.parts.end()) {
      f.parts.emplace(k, p);
    } else {
      auto pa = it->second;
      it->second = [pa, p](const Eigen::MatrixXd& x) -> Eigen::VectorXd { return pa(x) + p(x); };
    }
  }
  f.parts_complete = a.parts_complete && b.parts_complete;

  bool disjoint = true;
  for (const auto& [k, e] : b.energies) {
    if (a.energies.count(k)) disjoint = false;
  }
  if (disjoint && a.energies_complete && b.energies_complete) {
    f.energies = a.energies;
    f.energies.insert(b.energies.begin(), b.energies.end());
    f.energies_complete = true;
  }
  return f;
}

/// Scalar multiple.
inline TargetFunction operator*(double c, const TargetFunction& a) {
  TargetFunction f = a;
  auto ea = a.eval;
  f.eval = [ea, c](const Eigen::MatrixXd& x) -> Eigen::VectorXd { return c * ea(x); };
  for (auto& [k, p] : f.parts) {
    auto pk = p;
    p = [pk, c](const Eigen::MatrixXd& x) -> Eigen::VectorXd { return c * pk(x); };
  }
  for (auto& [k, e] : f.energies) e *= c * c;
  return f;
}

/// Built-in targets by name: quad_split, cubic_hermite, coordinate,
/// coordinate_sum, quad_split+coordinate_sum, quad_split+coordinate.
inline TargetFunction target_by_name(const std::string& name, int d) {
  if (name == "quad_split") return quad_split(d);
  if (name == "cubic_hermite") return cubic_hermite(d);
  if (name == "coordinate") return coordinate(d);
  if (name == "coordinate_sum") return coordinate_sum(d);
  if (name == "quad_split+coordinate_sum") return quad_split(d) + coordinate_sum(d);
  if (name == "quad_split+coordinate") return quad_split(d) + coordinate(d);
  throw std::invalid_argument("unknown target '" + name + "'");
}

}  // namespace rfnt
