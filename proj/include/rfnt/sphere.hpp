#pragma once

// Uniform sampling on S^{d-1}(sqrt d) and integration against the law of a
// single coordinate, tau_d(dx) = C_d (1 - x^2/d)^{(d-3)/2} dx on [-sqrt d, sqrt d].

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfnt/quadrature.hpp"
#include "rfnt/random.hpp"

namespace rfnt {

struct SphereSample {
  Eigen::MatrixXd points;  // n x d, row-major semantics (one point per row)
  double radius = 0.0;

  Eigen::Index size() const noexcept { return points.rows(); }
  Eigen::Index dim() const noexcept { return points.cols(); }
};

/// Rows are i.i.d. uniform on the sphere of the given radius. Uses the
/// normalized-Gaussian construction with generator state seeded by `seed`.
inline Eigen::MatrixXd sample_sphere_rows(Eigen::Index n, int d, double radius, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_sphere: n must be >= 1");
  if (d < 2) throw std::invalid_argument("sample_sphere: d must be >= 2");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    double nrm2 = 0.0;
    do {
      for (int j = 0; j < d; ++j) {
        const double g = gauss(rng);
        x(i, j) = g;
      }
      nrm2 = x.row(i).squaredNorm();
    } while (nrm2 == 0.0);
    x.row(i) *= radius / std::sqrt(nrm2);
  }
  return x;
}

inline SphereSample sample_sphere(Eigen::Index n, int d, std::uint64_t seed) {
  const double r = std::sqrt(static_cast<double>(d));
  return {sample_sphere_rows(n, d, r, seed), r};
}

/// log C_d with C_d = Gamma(d-1) / (2^{d-2} sqrt(d) Gamma((d-1)/2)^2).
inline double marginal_log_normalizer(int d) {
  if (d < 2) throw std::invalid_argument("marginal measure needs d >= 2");
  return std::lgamma(d - 1.0) - (d - 2.0) * std::numbers::ln2 - 0.5 * std::log(static_cast<double>(d)) -
         2.0 * std::lgamma(0.5 * (d - 1.0));
}

/// The law of <e, x> for x uniform on S^{d-1}(sqrt d).
class MarginalMeasure {
 public:
  explicit MarginalMeasure(int d) : d_(d), log_c_(marginal_log_normalizer(d)) {}

  int dim() const noexcept { return d_; }
  double normalizer() const noexcept { return std::exp(log_c_); }
  double log_normalizer() const noexcept { return log_c_; }

  /// d < 4 has a non-positive exponent: the density is unbounded (d = 2) or
  /// flat (d = 3) at the endpoints. Supported, but quadrature accuracy is
  /// limited by the endpoint grading.
  bool flagged() const noexcept { return d_ < 4; }

  double density(double x) const noexcept {
    const double t = x / std::sqrt(static_cast<double>(d_));
    if (!(std::abs(t) < 1.0)) return 0.0;
    return std::exp(log_c_ + 0.5 * (d_ - 3.0) * std::log((1.0 - t) * (1.0 + t)));
  }

 private:
  int d_;
  double log_c_;
};

inline double marginal_density(int d, double x) { return MarginalMeasure(d).density(x); }

/// Composite rule for integrals against tau_d, in the original variable x.
///
/// Panels are laid out in t = x / sqrt(d): max(64, ceil(8 sqrt d)) uniform
/// panels, the two end panels replaced by a geometric grading towards +-1,
/// and a break at every kink / sqrt(d). Each panel carries 20 nodes.
class MarginalQuadrature {
 public:
  static constexpr double grading_ratio = 0.25;
  static constexpr int grading_levels = 24;

  explicit MarginalQuadrature(int d, const std::vector<double>& kinks = {}) : measure_(d) {
    const double sd = std::sqrt(static_cast<double>(d));
    const int panels = std::max(64, static_cast<int>(std::ceil(8.0 * sd)));
    const double h = 2.0 / panels;
    std::vector<double> breaks;
    for (int i = 1; i < panels; ++i) breaks.push_back(-1.0 + h * i);
    double s = h;
    for (int j = 0; j <= grading_levels; ++j) {
      breaks.push_back(-1.0 + s);
      breaks.push_back(1.0 - s);
      s *= grading_ratio;
    }
    for (double k : kinks) breaks.push_back(k / sd);
    breaks = merge_breakpoints(std::move(breaks), -1.0, 1.0);

    const double log_c = measure_.log_normalizer();
    const double expo = 0.5 * (d - 3.0);
    const auto& base = gauss_legendre_20();
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
      const double a = breaks[p], b = breaks[p + 1];
      const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
      for (std::size_t i = 0; i < base.nodes.size(); ++i) {
        // 1 - t^2 from the distance to the nearer endpoint, accurate near +-1.
        const double off = half * base.nodes[i];
        const double t = mid + off;
        const double one_minus = (t >= 0.0) ? (1.0 - b) + (half - off) : (a + 1.0) + (half + off);
        const double w = std::exp(log_c + expo * std::log(one_minus * (2.0 - one_minus)));
        rule_.nodes.push_back(sd * t);
        rule_.weights.push_back(sd * half * base.weights[i] * w);
      }
    }
  }

  const MarginalMeasure& measure() const noexcept { return measure_; }
  const CompositeRule& rule() const noexcept { return rule_; }
  const std::vector<double>& nodes() const noexcept { return rule_.nodes; }
  const std::vector<double>& weights() const noexcept { return rule_.weights; }

  template <class F>
  double integrate(F&& g) const {
    return rule_.integrate(std::forward<F>(g));
  }

 private:
  MarginalMeasure measure_;
  CompositeRule rule_;
};

/// Integral of g against tau_d with panel breaks at `kinks` (in x).
template <class F>
double quadrature(int d, F&& g, const std::vector<double>& kinks = {}) {
  return MarginalQuadrature(d, kinks).integrate(std::forward<F>(g));
}

}  // namespace rfnt
