#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rfnt {

/// Raised when an integrand returns a non-finite value at a quadrature node.
class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double node, double value)
      : std::runtime_error(what), node_(node), value_(value) {}
  double node() const noexcept { return node_; }
  double value() const noexcept { return value_; }

 private:
  double node_;
  double value_;
};

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(int n) : nodes(n), weights(n) {
    if (n < 1) throw std::invalid_argument("GaussLegendre: n must be >= 1");
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
      // Tricomi initial guess, then Newton on P_n.
      double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        if (n == 1) p0 = 1.0, p1 = x;
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double step = p1 / dp;
        x -= step;
        if (std::abs(step) < 1e-16) break;
      }
      nodes[i] = -x;
      nodes[n - 1 - i] = x;
      const double w = 2.0 / ((1.0 - x * x) * dp * dp);
      weights[i] = w;
      weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) nodes[n / 2] = 0.0;
  }
};

/// 20-point rule shared by all composite integrators.
inline const GaussLegendre& gauss_legendre_20() {
  static const GaussLegendre rule(20);
  return rule;
}

/// A flattened composite rule: sum_i weights[i] * g(nodes[i]).
struct CompositeRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  /// Integrate g, aborting with diagnostics on a non-finite value.
  template <class F>
  double integrate(F&& g) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double v = g(nodes[i]);
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "non-finite integrand value " << v << " at node " << nodes[i];
        throw QuadratureError(os.str(), nodes[i], v);
      }
      acc += weights[i] * v;
    }
    return acc;
  }

  std::size_t size() const noexcept { return nodes.size(); }
};

/// Sorted, de-duplicated breakpoints restricted to [lo, hi] (both included).
inline std::vector<double> merge_breakpoints(std::vector<double> pts, double lo, double hi) {
  pts.push_back(lo);
  pts.push_back(hi);
  std::erase_if(pts, [&](double p) { return !(p >= lo && p <= hi); });
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](double a, double b) { return std::abs(a - b) <= 1e-15 * (1.0 + std::abs(a)); }),
            pts.end());
  return pts;
}

/// Composite Gauss-Legendre over consecutive breakpoints, weight(x) folded in.
template <class W>
CompositeRule composite_rule(const std::vector<double>& breaks, W&& weight) {
  const auto& base = gauss_legendre_20();
  CompositeRule rule;
  rule.nodes.reserve(base.nodes.size() * breaks.size());
  rule.weights.reserve(base.nodes.size() * breaks.size());
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    const double a = breaks[p], b = breaks[p + 1];
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (std::size_t i = 0; i < base.nodes.size(); ++i) {
      const double x = mid + half * base.nodes[i];
      rule.nodes.push_back(x);
      rule.weights.push_back(half * base.weights[i] * weight(x));
    }
  }
  return rule;
}

/// Rule for E[g(G)], G ~ N(0,1): composite Gauss-Legendre on [-14, 14]
/// (Gaussian mass outside is below 1e-43) with panel breaks at `kinks`.
inline CompositeRule gaussian_rule(const std::vector<double>& kinks = {}) {
  constexpr double L = 14.0;
  constexpr int panels = 112;
  std::vector<double> breaks;
  for (int i = 0; i <= panels; ++i) breaks.push_back(-L + 2.0 * L * i / panels);
  breaks.insert(breaks.end(), kinks.begin(), kinks.end());
  breaks = merge_breakpoints(std::move(breaks), -L, L);
  const double c = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return composite_rule(breaks, [c](double x) { return c * std::exp(-0.5 * x * x); });
}

/// E[g(G)] for G standard normal.
template <class F>
double gaussian_expectation(F&& g, const std::vector<double>& kinks = {}) {
  return gaussian_rule(kinks).integrate(std::forward<F>(g));
}

}  // namespace rfnt
