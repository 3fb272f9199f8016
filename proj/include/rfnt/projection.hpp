#pragma once

// Low-degree projections by least squares on monomials, and Monte Carlo
// evaluation of the degree-k projector through its Gegenbauer kernel.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfnt/linmodels.hpp"
#include "rfnt/random.hpp"
#include "rfnt/specialfn.hpp"
#include "rfnt/sphere.hpp"
#include "rfnt/target.hpp"

namespace rfnt {

inline constexpr Eigen::Index default_basis_cap = 20000;

class UnderSampled : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Number of monomials of total degree <= l in d variables, C(d + l, l).
inline double monomial_basis_size(int d, int l) {
  double c = 1.0;
  for (int i = 1; i <= l; ++i) c = c * (d + i) / i;
  return std::round(c);
}

/// Exponent lists (as sorted variable indices) for all monomials of total
/// degree <= l, constant first.
inline std::vector<std::vector<int>> monomial_basis(int d, int l) {
  std::vector<std::vector<int>> out{{}};
  std::vector<std::vector<int>> frontier{{}};
  for (int deg = 1; deg <= l; ++deg) {
    std::vector<std::vector<int>> next;
    for (const auto& m : frontier) {
      const int start = m.empty() ? 0 : m.back();
      for (int i = start; i < d; ++i) {
        auto e = m;
        e.push_back(i);
        next.push_back(std::move(e));
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

inline Eigen::MatrixXd monomial_features(const Eigen::MatrixXd& X, const std::vector<std::vector<int>>& basis) {
  Eigen::MatrixXd Z(X.rows(), static_cast<Eigen::Index>(basis.size()));
  for (std::size_t c = 0; c < basis.size(); ++c) {
    Eigen::VectorXd col = Eigen::VectorXd::Ones(X.rows());
    for (int i : basis[c]) col.array() *= X.col(i).array();
    Z.col(static_cast<Eigen::Index>(c)) = col;
  }
  return Z;
}

struct LowDegreeFit {
  int degree = 0;
  Eigen::Index basis_size = 0;
  Eigen::Index rank = 0;
  Eigen::Index n_fit = 0;
  Eigen::VectorXd coef;
  double residual_norm2 = 0.0;  // estimate of ||P_{>l} f||^2
  double residual_stderr = 0.0;
  double total_norm2 = 0.0;  // sample mean of f^2
  double total_stderr = 0.0;
  std::vector<std::vector<int>> basis;
};

/// Least squares of f on all monomials of degree <= l over n_fit sphere
/// points. On the sphere the monomials are linearly dependent (sum x_i^2 =
/// d), so the fit is min-norm and the residual is RSS / (n - rank).
inline LowDegreeFit project_low_degree(const TargetFunction& f, int l, int d, Eigen::Index n_fit, std::uint64_t seed,
                                       Eigen::Index basis_cap = default_basis_cap) {
  if (l < 0) throw std::invalid_argument("project_low_degree: degree must be >= 0");
  const double m = monomial_basis_size(d, l);
  if (m > static_cast<double>(basis_cap)) {
    throw std::length_error("monomial basis of size " + std::to_string(static_cast<long long>(m)) + " exceeds cap " +
                            std::to_string(basis_cap));
  }
  if (static_cast<double>(n_fit) < 5.0 * m) {
    throw UnderSampled("project_low_degree: n_fit = " + std::to_string(n_fit) + " is below 5 x basis size " +
                       std::to_string(static_cast<long long>(m)));
  }
  LowDegreeFit out;
  out.degree = l;
  out.n_fit = n_fit;
  out.basis = monomial_basis(d, l);
  out.basis_size = static_cast<Eigen::Index>(out.basis.size());
  const SphereSample xs = sample_sphere(n_fit, d, seed);
  const Eigen::VectorXd y = f(xs.points);
  Eigen::MatrixXd Z = monomial_features(xs.points, out.basis);
  auto fit = fit_minnorm(Z, y, 1e-10);
  out.rank = fit.rank;
  const Eigen::ArrayXd r2 = (y - Z * fit.coef).array().square();
  out.coef = std::move(fit.coef);
  const double n = static_cast<double>(n_fit);
  const double dof = n - static_cast<double>(out.rank);
  out.residual_norm2 = r2.sum() / dof;
  out.residual_stderr = std::sqrt((r2 - r2.mean()).square().sum() / (n - 1.0) / n) * n / dof;
  const Eigen::ArrayXd y2 = y.array().square();
  out.total_norm2 = y2.mean();
  out.total_stderr = std::sqrt((y2 - out.total_norm2).square().sum() / (n - 1.0) / n);
  return out;
}

/// (P_k f)(x) = B(d,k) E_y[Q_k(<x, y>) f(y)] by Monte Carlo over y.
inline McEstimate projector_gegenbauer(const BatchFunction& f, int k, const Eigen::VectorXd& x, std::size_t n_mc,
                                       std::uint64_t seed, std::size_t chunk = 20000) {
  const int d = static_cast<int>(x.size());
  const GegenbauerEvaluator q(d, k);
  const double b = dim_harmonics_value(d, k);
  double s1 = 0.0, s2 = 0.0;
  std::size_t done = 0;
  std::uint64_t c = 0;
  while (done < n_mc) {
    const std::size_t m = std::min(chunk, n_mc - done);
    const SphereSample ys = sample_sphere(static_cast<Eigen::Index>(m), d, derive_seed(seed, c++));
    const Eigen::VectorXd fy = f(ys.points);
    const Eigen::VectorXd t = ys.points * x;
    for (Eigen::Index i = 0; i < fy.size(); ++i) {
      const double v = b * q.evaluate_unchecked(k, std::clamp(t[i], -1.0 * d, 1.0 * d)) * fy[i];
      s1 += v;
      s2 += v * v;
    }
    done += m;
  }
  const double n = static_cast<double>(n_mc);
  McEstimate e;
  e.mean = s1 / n;
  e.draws = n_mc;
  e.stderr_ = n > 1 ? std::sqrt(std::max(0.0, (s2 / n - e.mean * e.mean) * n / (n - 1.0)) / n) : 0.0;
  return e;
}

}  // namespace rfnt
