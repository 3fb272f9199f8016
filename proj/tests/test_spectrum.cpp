#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "rfnt/spectrum.hpp"

using namespace rfnt;

namespace {

double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
double upper_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double double_factorial(int n) {
  double v = 1.0;
  for (int i = n; i > 1; i -= 2) v *= i;
  return v;
}

// E[(G - u0)_+ He_k(G)]: phi(u0) - u0 Q(u0), Q(u0), He_{k-2}(u0) phi(u0).
double shifted_relu_mu(int k, double u0) {
  if (k == 0) return phi(u0) - u0 * upper_tail(u0);
  if (k == 1) return upper_tail(u0);
  return hermite_eval(k - 2, u0) * phi(u0);
}

// E[1{G >= u0} He_k(G)] = He_{k-1}(u0) phi(u0) for k >= 1.
double step_mu(int k, double u0) {
  if (k == 0) return upper_tail(u0);
  return hermite_eval(k - 1, u0) * phi(u0);
}

}  // namespace

TEST(ActivationCoeff, Constant) {
  const auto c = activation_gegenbauer_coeffs(constant_activation(1.0), 30, 10);
  EXPECT_NEAR(c[0], 1.0, 1e-12);
  for (int k = 1; k <= 10; ++k) EXPECT_NEAR(c[k], 0.0, 1e-12);
}

TEST(ActivationCoeff, Identity) {
  for (int d : {10, 30, 100}) {
    const auto c = activation_gegenbauer_coeffs(identity_activation(), d, 6);
    EXPECT_NEAR(c[1], 1.0 / std::sqrt(d), 1e-12);
    for (int k : {0, 2, 3, 4, 5, 6}) EXPECT_NEAR(c[k], 0.0, 1e-12);
  }
}

TEST(ActivationCoeff, SingleAgreesWithTable) {
  const auto s = shifted_relu(0.5);
  const auto table = activation_gegenbauer_coeffs(s, 30, 6);
  for (int k = 0; k <= 6; ++k) EXPECT_NEAR(activation_gegenbauer_coeff(s, 30, k), table[k], 1e-15);
}

TEST(ActivationCoeff, ShiftedReluLowDegreesClosedForm) {
  // At d = 3 the marginal is uniform on [-s, s], s = sqrt 3: lambda_0 =
  // (s - u0)^2 / (4 s) and lambda_1 = E[(x - u0)_+ x / s].
  const double s = std::sqrt(3.0), u0 = 0.5;
  const auto c = activation_gegenbauer_coeffs(shifted_relu(u0), 3, 1);
  EXPECT_NEAR(c[0], (s - u0) * (s - u0) / (4.0 * s), 1e-12);
  const double m1 = ((s * s * s - u0 * u0 * u0) / 3.0 - u0 * (s * s - u0 * u0) / 2.0) / (2.0 * s);
  EXPECT_NEAR(c[1], m1 / s, 1e-12);
}

TEST(ActivationCoeff, ParsevalShiftedRelu) {
  // The degree-40 truncation leaves a tail of order 1e-4 for a kinked
  // activation, so the identity is checked with enough degrees for 1e-6.
  const int d = 50;
  const auto s = shifted_relu(0.5);
  const double norm2 = activation_norm2(s, d);
  const int K = 600;
  const auto c = activation_gegenbauer_coeffs(s, d, K);
  double acc = 0.0;
  for (int k = 0; k <= K; ++k) acc += c[k] * c[k] * dim_harmonics_value(d, k);
  EXPECT_NEAR(acc, norm2, 1e-6);
  double acc40 = 0.0;
  for (int k = 0; k <= 40; ++k) acc40 += c[k] * c[k] * dim_harmonics_value(d, k);
  EXPECT_GT(norm2 - acc40, 0.0);
  EXPECT_LT(norm2 - acc40, 1e-3 * norm2);
}

TEST(HermiteCoeff, StepFunction) {
  const auto mu = hermite_coefficients(step(0.0).value, 9, step(0.0).kinks);
  EXPECT_NEAR(mu[0], 0.5, 1e-8);
  EXPECT_NEAR(mu[1], 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-8);
  EXPECT_NEAR(mu[2], 0.0, 1e-8);
  for (int k = 1; k <= 9; ++k) {
    const double want = (k % 2 == 0) ? 0.0 : std::pow(-1.0, (k - 1) / 2) * double_factorial(k - 2) / std::sqrt(2.0 * std::numbers::pi);
    EXPECT_NEAR(mu[k], want, 1e-8) << k;
  }
}

TEST(HermiteCoeff, ShiftedReluClosedForm) {
  const auto s = shifted_relu(0.5);
  for (int k = 0; k <= 10; ++k) EXPECT_NEAR(hermite_coeff(s, k), shifted_relu_mu(k, 0.5), 1e-10) << k;
}

TEST(HermiteCoeff, SecondMomentRelation) {
  // mu_k(x^2 g) = mu_{k+2}(g) + (2k+1) mu_k(g) + k(k-1) mu_{k-2}(g), g = sigma'.
  const double u0 = 0.5;
  const auto g = shifted_relu(u0).derivative_spec();
  const auto mu = hermite_coefficients(g.value, 10, g.kinks);
  const auto mu2 = hermite_coefficients([&](double x) { return x * x * g.value(x); }, 8, g.kinks);
  for (int k = 0; k <= 8; ++k) {
    const double rhs = mu[k + 2] + (2 * k + 1) * mu[k] + (k >= 2 ? k * (k - 1.0) * mu[k - 2] : 0.0);
    EXPECT_NEAR(mu2[k], rhs, 1e-7) << k;
    EXPECT_NEAR(mu[k], step_mu(k, u0), 1e-10) << k;
  }
}

TEST(KernelEigenvalues, ConstantKernel) {
  const auto spec = kernel_eigenvalues([](double) { return 2.5; }, 30, 8);
  EXPECT_NEAR(spec.xi(0), 2.5, 1e-12);
  for (int k = 1; k <= 8; ++k) EXPECT_NEAR(spec.xi(k), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(spec.total_mass(), 2.5);
}

TEST(KernelEigenvalues, LinearKernel) {
  for (int d : {10, 30}) {
    const auto spec = kernel_eigenvalues([](double t) { return t; }, d, 6);
    EXPECT_NEAR(spec.xi(1), 1.0 / d, 1e-12);
    for (int k : {0, 2, 3, 4}) EXPECT_NEAR(spec.xi(k), 0.0, 1e-12);
    EXPECT_EQ(spec.lambda_star(1), 0.0);
    EXPECT_NEAR(spec.kappa_tail(1), 0.0, 1e-12);
  }
}

TEST(KernelEigenvalues, PolynomialKernelSmallDegreeLimit) {
  // xi_k(h) d^k -> h^(k)(0) for h(t) = exp(t).
  const int d = 2000;
  const auto spec = kernel_eigenvalues([](double t) { return std::exp(t); }, d, 3);
  for (int k = 0; k <= 3; ++k) EXPECT_NEAR(spec.xi(k) * std::pow(d, k), 1.0, 5e-3) << k;
}

TEST(RfKernel, SpectrumIsSquaredCoefficients) {
  const int d = 30;
  const auto s = shifted_relu(0.5);
  const RfKernel h(s, d);
  const auto lam = activation_gegenbauer_coeffs(s, d, 40);
  const auto spec = kernel_eigenvalues(h, d, 40);
  for (int k = 0; k <= 40; ++k) {
    EXPECT_NEAR(h.spectrum().xi(k), lam[k] * lam[k], 1e-18);
    EXPECT_NEAR(spec.xi(k), lam[k] * lam[k], 1e-10 * lam[0] * lam[0]) << k;
  }
  EXPECT_TRUE(h.spectrum().is_psd());
  EXPECT_GT(h.spectrum().lambda_star(1), 0.0);
  EXPECT_NEAR(h.spectrum().lambda_star(0), lam[0] * lam[0], 1e-15);
}

TEST(RfKernel, DiagonalIsActivationNorm) {
  const int d = 30;
  const auto s = shifted_relu(0.5);
  const RfKernel h(s, d);
  EXPECT_NEAR(h(1.0), activation_norm2(s, d), 1e-15);
  EXPECT_NEAR(h.series(1.0), h(1.0), 1e-3 * h(1.0));
  EXPECT_FALSE(h.spectrum().partial_mass(40) > h.mass() * (1 + 1e-8));
  EXPECT_NEAR(h.spectrum().kappa_tail(1), h.mass() - h.spectrum().partial_mass(1), 1e-15);
}

TEST(RfKernel, EvenActivationGivesEvenKernel) {
  const auto sq = custom_activation("square", [](double u) { return u * u; }, [](double u) { return 2 * u; });
  const RfKernel h(sq, 20, 10);
  for (double t : {0.1, 0.35, 0.8}) EXPECT_NEAR(h(t), h(-t), 1e-12);
  const auto mc = rf_kernel_mc(sq, 20, 0.35, 400000, 9);
  EXPECT_NEAR(h(0.35), mc.mean, 4 * mc.stderr_);
}

TEST(RfKernel, SeriesMatchesMonteCarlo) {
  const int d = 30;
  const auto s = shifted_relu(0.5);
  const RfKernel h(s, d);
  const auto pts = sample_sphere(20, d, 77).points;
  for (int p = 0; p < 10; ++p) {
    const double t = pts.row(2 * p).dot(pts.row(2 * p + 1)) / d;
    const auto mc = rf_kernel_mc(s, d, t, 1000000, 1000 + p);
    EXPECT_NEAR(h(t), mc.mean, 3.0 * mc.stderr_) << "t=" << t;
  }
}

TEST(RfKernel, SeriesMatchesMonteCarloAwayFromZero) {
  const int d = 30;
  const auto s = shifted_relu(0.5);
  const RfKernel h(s, d);
  for (double t : {-0.8, -0.3, 0.5, 0.9}) {
    const auto mc = rf_kernel_mc(s, d, t, 1000000, 4242);
    EXPECT_NEAR(h(t), mc.mean, 4.0 * mc.stderr_ + 1e-4) << "t=" << t;
  }
}

TEST(NtKernel, GammaNonNegativeAndFormsAgree) {
  const int d = 30;
  const NtKernel h(shifted_relu(0.5), d);
  for (double g : h.gamma()) EXPECT_GE(g, 0.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const double t = unif(rng);
    EXPECT_NEAR(h.direct(t), h.gamma_form(t), 1e-12 * h.mass());
  }
}

TEST(NtKernel, GammaTelescopes) {
  // sum_m Gamma_m / d = sum_k a_k (s_k + t_k) = sum_{k<=K} a_k.
  for (int d : {10, 30, 100}) {
    const NtKernel h(shifted_relu(0.5), d);
    double lhs = 0.0, rhs = 0.0;
    for (double g : h.gamma()) lhs += g / d;
    for (int k = 0; k <= h.max_degree(); ++k) rhs += h.a(k);
    EXPECT_NEAR(lhs, rhs, 1e-12 * rhs);
    EXPECT_NEAR(h.tail_mass(), h.mass() - rhs, 1e-15);
    EXPECT_GT(h.tail_mass(), 0.0);
  }
}

TEST(NtKernel, TruncationTailShrinksWithDegree) {
  const int d = 30;
  const NtKernel h40(shifted_relu(0.5), d, 40), h160(shifted_relu(0.5), d, 160);
  EXPECT_LT(h160.tail_mass(), h40.tail_mass());
  EXPECT_NEAR(h40.mass(), upper_tail(0.5), 0.02);
}

TEST(NtKernel, DirectMatchesMonteCarlo) {
  const int d = 30;
  const auto s = shifted_relu(0.5);
  const NtKernel h(s, d);
  for (double t : {-0.2, 0.15, 0.4}) {
    const auto mc = rf_kernel_mc(s.derivative_spec(), d, t, 1000000, 31);
    EXPECT_NEAR(h(t), t * mc.mean, 3.0 * std::abs(t) * mc.stderr_ + 1e-4) << t;
  }
  EXPECT_DOUBLE_EQ(h(1.0), h.mass());
}

TEST(NtKernel, SpectrumFromGamma) {
  const int d = 20;
  const NtKernel h(shifted_relu(0.5), d);
  const auto spec = h.spectrum();
  EXPECT_TRUE(spec.is_psd());
  const auto direct = kernel_eigenvalues([&](double t) { return h.direct(t); }, d, 10);
  for (int m = 0; m <= 10; ++m) EXPECT_NEAR(spec.xi(m), direct.xi(m), 1e-10 * spec.xi(0)) << m;
}

TEST(LambdaStar, ZeroFloor) {
  const KernelSpectrum spec(10, {0.5, 1e-12, 0.01}, 1.0);
  EXPECT_EQ(spec.lambda_star(1), 0.0);
  EXPECT_NEAR(spec.lambda_star(0), 0.5, 0.0);
  const KernelSpectrum spec2(10, {0.5, 0.02, 0.01}, 1.0);
  EXPECT_NEAR(lambda_star(spec2, 2), 100.0 * 0.01, 1e-14);
  EXPECT_THROW(spec2.lambda_star(3), std::out_of_range);
}
