#pragma once

// Gegenbauer Gram matrices of random points and their deviation from the
// identity in operator norm.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "rfnt/random.hpp"
#include "rfnt/specialfn.hpp"
#include "rfnt/sphere.hpp"

namespace rfnt {

/// W_ij = Q_k(<theta_i, theta_j>) for rows on S^{d-1}(sqrt d); diagonal is 1.
inline Eigen::MatrixXd gram_gegenbauer(const Eigen::MatrixXd& theta, int k) {
  const Eigen::Index N = theta.rows();
  const int d = static_cast<int>(theta.cols());
  if (N < 1) throw std::invalid_argument("gram_gegenbauer: need at least one point");
  const GegenbauerEvaluator q(d, k);
  const Eigen::MatrixXd G = theta * theta.transpose();
  Eigen::MatrixXd W(N, N);
  for (Eigen::Index j = 0; j < N; ++j) {
    W(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < N; ++i) {
      W(i, j) = W(j, i) = q.evaluate_unchecked(k, std::clamp(G(i, j), -1.0 * d, 1.0 * d));
    }
  }
  return W;
}

struct OpnormResult {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  Eigen::VectorXd vector;  // last iterate
};

namespace detail {

inline OpnormResult power_on_square(const Eigen::MatrixXd& M, Eigen::VectorXd v, double tol, int max_iter) {
  OpnormResult r;
  v.normalize();
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::VectorXd mv = M * v;
    const Eigen::VectorXd w = M * mv;
    const double mu = v.dot(w);  // Rayleigh quotient of M^2
    r.iterations = it;
    r.value = std::sqrt(std::max(0.0, mu));
    if (mu <= 0.0) {
      r.converged = true;
      r.vector = v;
      return r;
    }
    const double resid = (w - mu * v).norm();
    v = w / w.norm();
    if (resid <= tol * mu) {
      r.converged = true;
      break;
    }
  }
  r.vector = v;
  return r;
}

}  // namespace detail

/// Spectral norm of a symmetric matrix by power iteration on M^2, started
/// from the normalized ones vector and once from a random vector. Converged
/// when ||M^2 v - mu v|| <= tol mu. On non-convergence the larger estimate is
/// returned with `converged` unset.
inline OpnormResult opnorm(const Eigen::MatrixXd& M, double tol = 1e-6, int max_iter = 10000, std::uint64_t seed = 0) {
  if (M.rows() != M.cols()) throw std::invalid_argument("opnorm: matrix must be square");
  const Eigen::Index n = M.rows();
  if (n == 0) return {0.0, 0, true, {}};
  OpnormResult a = detail::power_on_square(M, Eigen::VectorXd::Ones(n), tol, max_iter);
  Rng rng(derive_seed(seed, Stream::restart));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v0(n);
  for (Eigen::Index i = 0; i < n; ++i) v0[i] = gauss(rng);
  OpnormResult b = detail::power_on_square(M, v0, tol, max_iter);
  OpnormResult best = a.value >= b.value ? a : b;
  best.converged = a.converged && b.converged;
  best.iterations = a.iterations + b.iterations;
  return best;
}

struct GramDiagnostic {
  int d = 0;
  int k = 0;
  Eigen::Index N = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> values;  // ||W - I||_op per repetition

  double median() const {
    if (values.empty()) return 0.0;
    std::vector<double> v = values;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  }
};

/// ||W - I||_op for `reps` independent point sets; repetition r draws from
/// derive_seed(seed, r).
inline GramDiagnostic gram_diagnostic(int d, int k, Eigen::Index N, int reps, std::uint64_t seed) {
  GramDiagnostic g;
  g.d = d;
  g.k = k;
  g.N = N;
  for (int r = 0; r < reps; ++r) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(r));
    const SphereSample th = sample_sphere(N, d, s);
    Eigen::MatrixXd W = gram_gegenbauer(th.points, k);
    W.diagonal().array() -= 1.0;
    g.seeds.push_back(s);
    g.values.push_back(opnorm(W, 1e-6, 10000, s).value);
  }
  return g;
}

}  // namespace rfnt
