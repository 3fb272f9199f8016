#pragma once

// Gegenbauer and Hermite polynomials, harmonic-space dimensions, and the
// Gegenbauer -> Hermite coefficient correspondence.
//
// Conventions: Q_k^{(d)} lives on [-d, d] with Q_k^{(d)}(d) = 1, so that
// Q_k(<x, y>) is the zonal function for x, y on the sphere of radius sqrt(d).
// He_k are the probabilists' Hermite polynomials, E[He_j He_k] = k! delta_jk.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rfnt {

using uint128 = unsigned __int128;

namespace detail {

inline void check_dimension(int d) {
  if (d < 2) throw std::invalid_argument("dimension d must be >= 2, got " + std::to_string(d));
}

inline void check_degree(int k) {
  if (k < 0) throw std::invalid_argument("degree k must be >= 0, got " + std::to_string(k));
}

}  // namespace detail

/// Coefficient of Q_{k-1} in (t/d) Q_k = s_k Q_{k-1} + t_k Q_{k+1}.
inline double recurrence_s(int d, int k) {
  if (k <= 0) return 0.0;
  return static_cast<double>(k) / (2.0 * k + d - 2.0);
}

/// Coefficient of Q_{k+1} in the same recurrence; t_{-1} = 0 by convention.
/// For k = 0 the value is 1 (Q_1 = t/d), including the d = 2 limit.
inline double recurrence_t(int d, int k) {
  if (k < 0) return 0.0;
  if (k == 0) return 1.0;
  return (k + d - 2.0) / (2.0 * k + d - 2.0);
}

/// Immutable evaluator of Q_0..Q_K in dimension d by upward recurrence.
class GegenbauerEvaluator {
 public:
  GegenbauerEvaluator(int d, int max_degree) : d_(d), max_degree_(max_degree) {
    detail::check_dimension(d);
    detail::check_degree(max_degree);
  }

  int dim() const noexcept { return d_; }
  int max_degree() const noexcept { return max_degree_; }

  /// Values Q_0(t), ..., Q_K(t) written into out (size K+1). No domain check.
  void evaluate_all_unchecked(double t, double* out) const noexcept {
    out[0] = 1.0;
    if (max_degree_ == 0) return;
    const double u = t / d_;
    out[1] = u;
    for (int k = 1; k < max_degree_; ++k) {
      out[k + 1] = (u * out[k] - recurrence_s(d_, k) * out[k - 1]) / recurrence_t(d_, k);
    }
  }

  std::vector<double> evaluate_all(double t) const {
    check_domain(t);
    std::vector<double> q(max_degree_ + 1);
    evaluate_all_unchecked(t, q.data());
    return q;
  }

  double operator()(int k, double t) const {
    detail::check_degree(k);
    if (k > max_degree_) throw std::out_of_range("degree exceeds evaluator max_degree");
    check_domain(t);
    return evaluate_unchecked(k, t);
  }

  double evaluate_unchecked(int k, double t) const noexcept {
    if (k == 0) return 1.0;
    const double u = t / d_;
    double q0 = 1.0, q1 = u;
    for (int j = 1; j < k; ++j) {
      const double q2 = (u * q1 - recurrence_s(d_, j) * q0) / recurrence_t(d_, j);
      q0 = q1;
      q1 = q2;
    }
    return q1;
  }

  void check_domain(double t) const {
    if (!(std::abs(t) <= d_ * (1.0 + 1e-12))) {
      throw std::domain_error("Gegenbauer argument |t| = " + std::to_string(std::abs(t)) +
                              " exceeds d = " + std::to_string(d_));
    }
  }

 private:
  int d_;
  int max_degree_;
};

/// Q_k^{(d)}(t) for |t| <= d.
inline double gegenbauer_eval(int d, int k, double t) {
  detail::check_dimension(d);
  detail::check_degree(k);
  GegenbauerEvaluator q(d, k);
  q.check_domain(t);
  return q.evaluate_unchecked(k, t);
}

class HermiteEvaluator {
 public:
  explicit HermiteEvaluator(int max_degree) : max_degree_(max_degree) {
    detail::check_degree(max_degree);
  }

  int max_degree() const noexcept { return max_degree_; }

  void evaluate_all(double x, double* out) const noexcept {
    out[0] = 1.0;
    if (max_degree_ == 0) return;
    out[1] = x;
    for (int k = 1; k < max_degree_; ++k) out[k + 1] = x * out[k] - k * out[k - 1];
  }

  std::vector<double> evaluate_all(double x) const {
    std::vector<double> h(max_degree_ + 1);
    evaluate_all(x, h.data());
    return h;
  }

  double operator()(int k, double x) const {
    detail::check_degree(k);
    if (k > max_degree_) throw std::out_of_range("degree exceeds evaluator max_degree");
    return hermite_unchecked(k, x);
  }

  static double hermite_unchecked(int k, double x) noexcept {
    if (k == 0) return 1.0;
    double h0 = 1.0, h1 = x;
    for (int j = 1; j < k; ++j) {
      const double h2 = x * h1 - j * h0;
      h0 = h1;
      h1 = h2;
    }
    return h1;
  }

 private:
  int max_degree_;
};

/// Probabilists' Hermite polynomial He_k(x).
inline double hermite_eval(int k, double x) {
  detail::check_degree(k);
  return HermiteEvaluator::hermite_unchecked(k, x);
}

/// Dimension B(d, k) of degree-k spherical harmonics in R^d.
///
/// `exact` holds the integer when it fits in 128 bits; otherwise it is empty
/// and `value` carries a log-Gamma floating approximation.
struct HarmonicDimension {
  std::optional<uint128> exact;
  double value = 0.0;

  bool overflowed() const noexcept { return !exact.has_value(); }
};

namespace detail {

inline bool mul_overflow(uint128 a, uint128 b, uint128& out) { return __builtin_mul_overflow(a, b, &out); }

// Binomial C(n, r) with checked 128-bit arithmetic. Each partial product
// c * (n - r + i) / i is itself a binomial, so the division is exact.
inline std::optional<uint128> binomial_checked(std::int64_t n, std::int64_t r) {
  if (r < 0 || r > n) return uint128{0};
  r = std::min(r, n - r);
  uint128 c = 1;
  for (std::int64_t i = 1; i <= r; ++i) {
    const uint128 num = static_cast<uint128>(n - r + i);
    // c * num / i without overflow, dividing through g = gcd(c, i) first.
    const auto g = static_cast<std::int64_t>(
        std::gcd(static_cast<std::uint64_t>(c % static_cast<uint128>(i)), static_cast<std::uint64_t>(i)));
    const uint128 c_red = c / static_cast<uint128>(g);
    const uint128 i_red = static_cast<uint128>(i / g);
    const uint128 num_red = num / i_red;  // exact: i_red divides (c/g)*num and is coprime to c/g
    uint128 next;
    if (mul_overflow(c_red, num_red, next)) return std::nullopt;
    c = next;
  }
  return c;
}

}  // namespace detail

inline HarmonicDimension dim_harmonics(int d, int k) {
  detail::check_dimension(d);
  detail::check_degree(k);
  HarmonicDimension out;
  if (k == 0) {
    out.exact = 1;
    out.value = 1.0;
    return out;
  }
  // B(d,k) = (2k+d-2)/k * C(k+d-3, k-1)
  const auto binom = detail::binomial_checked(static_cast<std::int64_t>(k) + d - 3, k - 1);
  if (binom) {
    uint128 prod;
    if (!detail::mul_overflow(*binom, static_cast<uint128>(2 * k + d - 2), prod)) {
      out.exact = prod / static_cast<uint128>(k);
      out.value = static_cast<double>(*out.exact);
      return out;
    }
  }
  const double logb = std::log(2.0 * k + d - 2.0) - std::log(static_cast<double>(k)) +
                      std::lgamma(k + d - 2.0) - std::lgamma(static_cast<double>(k)) - std::lgamma(d - 1.0);
  out.value = std::exp(logb);
  return out;
}

/// B(d, k) as an exact integer; throws std::overflow_error past 128 bits.
inline uint128 dim_harmonics_exact(int d, int k) {
  const auto b = dim_harmonics(d, k);
  if (!b.exact) {
    throw std::overflow_error("B(" + std::to_string(d) + "," + std::to_string(k) +
                              ") exceeds 128-bit range; use dim_harmonics(d,k).value");
  }
  return *b.exact;
}

/// B(d, k) as a double (exact when representable).
inline double dim_harmonics_value(int d, int k) { return dim_harmonics(d, k).value; }

/// Monomial coefficients (ascending powers of t) of Q_k^{(d)}(t), via the
/// recurrence on coefficient vectors. Only meant for small k: the entries
/// scale like d^{-k}.
inline std::vector<long double> gegenbauer_monomial_coefficients(int d, int k) {
  detail::check_dimension(d);
  detail::check_degree(k);
  std::vector<long double> q0{1.0L};
  if (k == 0) return q0;
  std::vector<long double> q1{0.0L, 1.0L / d};
  for (int j = 1; j < k; ++j) {
    std::vector<long double> q2(j + 2, 0.0L);
    for (int i = 0; i <= j; ++i) q2[i + 1] += q1[i] / d;
    for (int i = 0; i < j; ++i) q2[i] -= recurrence_s(d, j) * q0[i];
    const long double tj = recurrence_t(d, j);
    for (auto& c : q2) c /= tj;
    q0 = std::move(q1);
    q1 = std::move(q2);
  }
  return q1;
}

/// Monomial coefficients of He_k(x).
inline std::vector<long double> hermite_monomial_coefficients(int k) {
  detail::check_degree(k);
  std::vector<long double> h0{1.0L};
  if (k == 0) return h0;
  std::vector<long double> h1{0.0L, 1.0L};
  for (int j = 1; j < k; ++j) {
    std::vector<long double> h2(j + 2, 0.0L);
    for (int i = 0; i <= j; ++i) h2[i + 1] += h1[i];
    for (int i = 0; i < j; ++i) h2[i] -= static_cast<long double>(j) * h0[i];
    h0 = std::move(h1);
    h1 = std::move(h2);
  }
  return h1;
}

/// Max-norm distance between the coefficient vectors of
/// Q_k^{(d)}(sqrt(d) x) * B(d,k)^{1/2} and He_k(x) / sqrt(k!).
/// Supported range: k <= 12, d <= 2000; outside it throws std::overflow_error.
inline double gegenbauer_hermite_gap(int d, int k) {
  detail::check_dimension(d);
  detail::check_degree(k);
  if (k > 12 || d > 2000) {
    throw std::overflow_error("gegenbauer_hermite_gap supports k <= 12 and d <= 2000");
  }
  const auto q = gegenbauer_monomial_coefficients(d, k);
  const auto h = hermite_monomial_coefficients(k);
  const long double sqrt_b = std::sqrt(static_cast<long double>(dim_harmonics_value(d, k)));
  long double kfact = 1.0L;
  for (int i = 2; i <= k; ++i) kfact *= i;
  const long double inv_sqrt_kfact = 1.0L / std::sqrt(kfact);
  long double gap = 0.0L;
  long double scale = 1.0L;  // d^{j/2}
  const long double sqrt_d = std::sqrt(static_cast<long double>(d));
  for (int j = 0; j <= k; ++j) {
    const long double lhs = q[j] * scale * sqrt_b;
    const long double rhs = h[j] * inv_sqrt_kfact;
    if (!std::isfinite(static_cast<double>(lhs))) {
      throw std::overflow_error("gegenbauer_hermite_gap: coefficient overflow");
    }
    gap = std::max(gap, std::abs(lhs - rhs));
    scale *= sqrt_d;
  }
  return static_cast<double>(gap);
}

}  // namespace rfnt
