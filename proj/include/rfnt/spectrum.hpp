#pragma once

// Gegenbauer and Hermite coefficients of activations, spectra of rotationally
// invariant kernels, and the RF / NT kernels of an activation.
//
// A kernel is written as a function h of the correlation t = <x1, x2> / d.
// Its eigenvalue on degree-k harmonics is
//   xi_k = int h(x / sqrt d) Q_k(sqrt(d) x) dtau_d(x),
// so that h(t) = sum_k xi_k B(d,k) Q_k(d t) and h(1) = sum_k xi_k B(d,k).

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfnt/activation.hpp"
#include "rfnt/quadrature.hpp"
#include "rfnt/random.hpp"
#include "rfnt/specialfn.hpp"
#include "rfnt/sphere.hpp"

namespace rfnt {

inline constexpr int default_truncation = 40;

/// int g(x) Q_k(sqrt(d) x) dtau_d for k = 0..K, all from one pass over the rule.
template <class F>
std::vector<double> gegenbauer_coefficients(F&& g, int d, int K, const std::vector<double>& kinks = {}) {
  const MarginalQuadrature quad(d, kinks);
  const GegenbauerEvaluator q(d, K);
  const double sd = std::sqrt(static_cast<double>(d));
  std::vector<double> out(K + 1, 0.0), qv(K + 1);
  const auto& nodes = quad.nodes();
  const auto& weights = quad.weights();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double v = g(nodes[i]);
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "non-finite integrand value " << v << " at x = " << nodes[i] << " (d = " << d << ")";
      throw QuadratureError(os.str(), nodes[i], v);
    }
    q.evaluate_all_unchecked(sd * nodes[i], qv.data());
    const double wv = weights[i] * v;
    for (int k = 0; k <= K; ++k) out[k] += wv * qv[k];
  }
  return out;
}

/// lambda_{d,k}(sigma) for k = 0..K.
inline std::vector<double> activation_gegenbauer_coeffs(const ActivationSpec& s, int d, int K) {
  return gegenbauer_coefficients(s.value, d, K, s.kinks);
}

inline double activation_gegenbauer_coeff(const ActivationSpec& s, int d, int k) {
  detail::check_degree(k);
  return activation_gegenbauer_coeffs(s, d, k)[k];
}

/// ||sigma||^2 in L^2(tau_d).
inline double activation_norm2(const ActivationSpec& s, int d) {
  return quadrature(d, [&](double x) { const double v = s.value(x); return v * v; }, s.kinks);
}

/// mu_k(g) = E[g(G) He_k(G)] for k = 0..K, G standard normal.
template <class F>
std::vector<double> hermite_coefficients(F&& g, int K, const std::vector<double>& kinks = {}) {
  detail::check_degree(K);
  const CompositeRule rule = gaussian_rule(kinks);
  const HermiteEvaluator he(K);
  std::vector<double> out(K + 1, 0.0), hv(K + 1);
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double v = g(rule.nodes[i]);
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "non-finite integrand value " << v << " at x = " << rule.nodes[i];
      throw QuadratureError(os.str(), rule.nodes[i], v);
    }
    he.evaluate_all(rule.nodes[i], hv.data());
    const double wv = rule.weights[i] * v;
    for (int k = 0; k <= K; ++k) out[k] += wv * hv[k];
  }
  return out;
}

template <class F>
double hermite_coeff(F&& g, int k, const std::vector<double>& kinks = {}) {
  return hermite_coefficients(std::forward<F>(g), k, kinks)[k];
}

inline double hermite_coeff(const ActivationSpec& s, int k) { return hermite_coeff(s.value, k, s.kinks); }

/// Per-degree eigenvalues of a rotationally invariant kernel.
class KernelSpectrum {
 public:
  static constexpr double zero_floor_rel = 1e-9;

  KernelSpectrum(int d, std::vector<double> xi, double total_mass)
      : d_(d), xi_(std::move(xi)), total_mass_(total_mass) {
    detail::check_dimension(d);
    dims_.reserve(xi_.size());
    for (std::size_t k = 0; k < xi_.size(); ++k) dims_.push_back(dim_harmonics_value(d, static_cast<int>(k)));
  }

  int dim() const noexcept { return d_; }
  int max_degree() const noexcept { return static_cast<int>(xi_.size()) - 1; }
  const std::vector<double>& xi() const noexcept { return xi_; }
  double xi(int k) const { return xi_.at(k); }
  const std::vector<double>& dims() const noexcept { return dims_; }

  /// h(1).
  double total_mass() const noexcept { return total_mass_; }

  /// sum_{k<=l} xi_k B(d,k).
  double partial_mass(int l) const {
    check_l(l);
    double acc = 0.0;
    for (int k = 0; k <= l; ++k) acc += xi_[k] * dims_[k];
    return acc;
  }

  /// total_mass - sum_{k<=K} xi_k B(d,k): what the truncation leaves out.
  double truncation_tail() const { return total_mass_ - partial_mass(max_degree()); }

  /// kappa_h = sum_{k>l} xi_k B(d,k), in complement form h(1) - sum_{k<=l}.
  double kappa_tail(int l) const { return total_mass_ - partial_mass(l); }

  double zero_floor() const noexcept { return zero_floor_rel * std::abs(total_mass_); }

  /// d^l min_{k<=l} xi_k, with |xi_k| below the zero floor counted as 0.
  double lambda_star(int l) const {
    check_l(l);
    double m = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= l; ++k) m = std::min(m, xi_[k] < zero_floor() ? 0.0 : xi_[k]);
    return std::pow(static_cast<double>(d_), l) * m;
  }

  /// Every xi_k >= -floor and the truncated mass does not exceed h(1).
  bool is_psd() const {
    for (double x : xi_) {
      if (x < -zero_floor()) return false;
    }
    return partial_mass(max_degree()) <= total_mass_ * (1.0 + 1e-8) + zero_floor();
  }

  double eval(double t) const {
    const GegenbauerEvaluator q(d_, max_degree());
    std::vector<double> qv(xi_.size());
    q.evaluate_all_unchecked(d_ * std::clamp(t, -1.0, 1.0), qv.data());
    double acc = 0.0;
    for (std::size_t k = 0; k < xi_.size(); ++k) acc += xi_[k] * dims_[k] * qv[k];
    return acc;
  }

 private:
  void check_l(int l) const {
    if (l < 0 || l > max_degree()) throw std::out_of_range("degree outside spectrum range");
  }

  int d_;
  std::vector<double> xi_;
  std::vector<double> dims_;
  double total_mass_;
};

/// Spectrum of h (a function of t in [-1, 1]); `kinks_t` are in t.
template <class H>
KernelSpectrum kernel_eigenvalues(H&& h, int d, int K, const std::vector<double>& kinks_t = {}) {
  const double sd = std::sqrt(static_cast<double>(d));
  std::vector<double> kinks_x;
  for (double k : kinks_t) kinks_x.push_back(k * sd);
  auto xi = gegenbauer_coefficients([&](double x) { return h(x / sd); }, d, K, kinks_x);
  return KernelSpectrum(d, std::move(xi), h(1.0));
}

inline double lambda_star(const KernelSpectrum& spec, int l) { return spec.lambda_star(l); }

struct McEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t draws = 0;
};

namespace detail {

// sum_k c_k Q_k(d t) by Clenshaw on the three-term recurrence.
inline double gegenbauer_series(int d, const std::vector<double>& c, double t) {
  const int K = static_cast<int>(c.size()) - 1;
  if (K < 0) return 0.0;
  const double u = std::clamp(t, -1.0, 1.0);
  // Q_{k+1} = (u Q_k - s_k Q_{k-1}) / t_k with u = (dt)/d.
  double b1 = 0.0, b2 = 0.0;
  for (int k = K; k >= 1; --k) {
    const double alpha = u / recurrence_t(d, k);
    const double beta_next = (k + 1 <= K) ? recurrence_s(d, k + 1) / recurrence_t(d, k + 1) : 0.0;
    const double b0 = c[k] + alpha * b1 - beta_next * b2;
    b2 = b1;
    b1 = b0;
  }
  const double beta1 = (K >= 1) ? recurrence_s(d, 1) / recurrence_t(d, 1) : 0.0;
  // Q_0 = 1, Q_1 = u.
  return c[0] + u * b1 - beta1 * b2;
}

}  // namespace detail

/// h^{RF}(t) = E_w[sigma(<w, x1>) sigma(<w, x2>)], w uniform on S^{d-1}(1),
/// x1, x2 on S^{d-1}(sqrt d) with <x1, x2> = d t.
class RfKernel {
 public:
  RfKernel(ActivationSpec sigma, int d, int K = default_truncation)
      : sigma_(std::move(sigma)),
        d_(d),
        lambda_(activation_gegenbauer_coeffs(sigma_, d, K)),
        mass_(activation_norm2(sigma_, d)) {
    std::vector<double> xi(lambda_.size());
    for (std::size_t k = 0; k < xi.size(); ++k) xi[k] = lambda_[k] * lambda_[k];
    spectrum_ = KernelSpectrum(d, std::move(xi), mass_);
    coef_.resize(lambda_.size());
    for (std::size_t k = 0; k < coef_.size(); ++k) coef_[k] = spectrum_.xi()[k] * spectrum_.dims()[k];
  }

  int dim() const noexcept { return d_; }
  const ActivationSpec& activation() const noexcept { return sigma_; }
  const std::vector<double>& lambda() const noexcept { return lambda_; }
  const KernelSpectrum& spectrum() const noexcept { return spectrum_; }

  /// h(1) = ||sigma||^2, computed directly rather than from the series.
  double mass() const noexcept { return mass_; }
  double tail_mass() const { return spectrum_.truncation_tail(); }
  bool truncation_warning() const { return tail_mass() > 1e-4 * std::abs(mass_); }

  /// Truncated series sum_{k<=K} lambda_k^2 B(d,k) Q_k(d t).
  double series(double t) const { return detail::gegenbauer_series(d_, coef_, t); }

  /// series(t) off the diagonal, the exact mass at t = 1.
  double operator()(double t) const { return t >= 1.0 ? mass_ : series(t); }

 private:
  ActivationSpec sigma_;
  int d_;
  std::vector<double> lambda_;
  double mass_;
  KernelSpectrum spectrum_{2, {}, 0.0};
  std::vector<double> coef_;
};

/// Monte Carlo estimate of E_w[sigma(<w,x1>) sigma(<w,x2>)] at <x1,x2> = d t.
inline McEstimate rf_kernel_mc(const ActivationSpec& sigma, int d, double t, std::size_t draws,
                               std::uint64_t seed) {
  if (d < 3) throw std::invalid_argument("rf_kernel_mc needs d >= 3");
  if (!(std::abs(t) <= 1.0)) throw std::domain_error("correlation outside [-1, 1]");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::chi_squared_distribution<double> chi2(d - 2.0);
  const double sd = std::sqrt(static_cast<double>(d));
  const double st = std::sqrt(std::max(0.0, 1.0 - t * t));
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double g1 = gauss(rng), g2 = gauss(rng);
    const double r = std::sqrt(g1 * g1 + g2 * g2 + chi2(rng));
    const double u1 = sd * g1 / r;
    const double u2 = sd * (t * g1 + st * g2) / r;
    const double v = sigma.value(u1) * sigma.value(u2);
    const double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
  }
  McEstimate e;
  e.mean = mean;
  e.draws = draws;
  e.stderr_ = draws > 1 ? std::sqrt(m2 / static_cast<double>(draws - 1) / static_cast<double>(draws)) : 0.0;
  return e;
}

/// h^{NT}(t) = t E_w[sigma'(<w, x1>) sigma'(<w, x2>)].
///
/// gamma(m) follows the unnormalized kernel <x1, x2> E[sigma' sigma'] =
/// d h^{NT}(t), so h^{NT}(t) = sum_m gamma(m) / d * Q_m(d t).
class NtKernel {
 public:
  NtKernel(const ActivationSpec& sigma, int d, int K = default_truncation)
      : d_(d), deriv_(sigma.derivative_spec()) {
    lambda_ = activation_gegenbauer_coeffs(deriv_, d, K);
    mass_ = activation_norm2(deriv_, d);
    a_.resize(lambda_.size());
    for (int k = 0; k <= K; ++k) a_[k] = lambda_[k] * lambda_[k] * dim_harmonics_value(d, k);
    gamma_.resize(K + 2);
    for (int m = 0; m <= K + 1; ++m) gamma_[m] = d * (recurrence_t(d, m - 1) * a(m - 1) + recurrence_s(d, m + 1) * a(m + 1));
    gamma_over_d_.resize(gamma_.size());
    for (std::size_t m = 0; m < gamma_.size(); ++m) gamma_over_d_[m] = gamma_[m] / d;
  }

  int dim() const noexcept { return d_; }
  int max_degree() const noexcept { return static_cast<int>(lambda_.size()) - 1; }
  const ActivationSpec& derivative() const noexcept { return deriv_; }

  /// lambda_{d,k}(sigma').
  const std::vector<double>& lambda() const noexcept { return lambda_; }

  /// lambda_{d,k}(sigma')^2 B(d,k), zero past the truncation.
  double a(int k) const { return (k < 0 || k > max_degree()) ? 0.0 : a_[k]; }

  /// Gamma_{d,m} for m = 0..K+1; exact (as a coefficient of the full
  /// kernel) for m <= K-1.
  const std::vector<double>& gamma() const noexcept { return gamma_; }
  double gamma(int m) const { return (m < 0 || m >= static_cast<int>(gamma_.size())) ? 0.0 : gamma_[m]; }

  /// h(1) = ||sigma'||^2, computed directly.
  double mass() const noexcept { return mass_; }
  double tail_mass() const {
    double acc = 0.0;
    for (double v : a_) acc += v;
    return mass_ - acc;
  }
  bool truncation_warning() const { return tail_mass() > 1e-4 * std::abs(mass_); }

  /// t * sum_{k<=K} a_k Q_k(d t).
  double direct(double t) const { return std::clamp(t, -1.0, 1.0) * detail::gegenbauer_series(d_, a_, t); }

  /// sum_m Gamma_m / d * Q_m(d t); equals direct(t) identically.
  double gamma_form(double t) const { return detail::gegenbauer_series(d_, gamma_over_d_, t); }

  double operator()(double t) const { return t >= 1.0 ? mass_ : direct(t); }

  /// Eigenvalues xi_m = Gamma_m / (d B(d,m)) for m <= K-1.
  KernelSpectrum spectrum() const {
    std::vector<double> xi(std::max(1, max_degree()));
    for (std::size_t m = 0; m < xi.size(); ++m) xi[m] = gamma_over_d_[m] / dim_harmonics_value(d_, static_cast<int>(m));
    return KernelSpectrum(d_, std::move(xi), mass_);
  }

 private:
  int d_;
  ActivationSpec deriv_;
  std::vector<double> lambda_;
  double mass_ = 0.0;
  std::vector<double> a_;
  std::vector<double> gamma_;
  std::vector<double> gamma_over_d_;
};

inline RfKernel rf_kernel(const ActivationSpec& sigma, int d, int K = default_truncation) { return {sigma, d, K}; }
inline NtKernel nt_kernel(const ActivationSpec& sigma, int d, int K = default_truncation) { return {sigma, d, K}; }

}  // namespace rfnt
