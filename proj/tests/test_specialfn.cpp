#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "rfnt/quadrature.hpp"
#include "rfnt/specialfn.hpp"

using namespace rfnt;

namespace {

// Q_k^{(d)} from the Rodrigues formula, differentiating
// p(u) (1-u^2)^beta symbolically with u = t/d:
//   d/du [p (1-u^2)^b] = [p' (1-u^2) - 2 b u p] (1-u^2)^{b-1}.
long double rodrigues(int d, int k, long double t) {
  std::vector<long double> p{1.0L};
  long double beta = k + 0.5L * (d - 3);
  for (int j = 0; j < k; ++j) {
    std::vector<long double> q(p.size() + 2, 0.0L);
    for (std::size_t i = 1; i < p.size(); ++i) {
      q[i - 1] += i * p[i];
      q[i + 1] -= i * p[i];
    }
    for (std::size_t i = 0; i < p.size(); ++i) q[i + 1] -= 2.0L * beta * p[i];
    p = std::move(q);
    beta -= 1.0L;
  }
  const long double u = t / d;
  long double val = 0.0L;
  for (std::size_t i = p.size(); i-- > 0;) val = val * u + p[i];
  // d^k from the formula cancels the 1/d^k of the chain rule.
  const long double pref = std::pow(-0.5L, k) * std::exp(std::lgamma(0.5L * (d - 1)) - std::lgamma(k + 0.5L * (d - 1)));
  return pref * val;
}

long double binom_ld(int n, int r) {
  if (r < 0 || r > n) return 0.0L;
  long double c = 1.0L;
  for (int i = 1; i <= r; ++i) c = c * (n - r + i) / i;
  return c;
}

uint128 binom_pascal(int n, int r) {
  if (r < 0 || r > n) return 0;
  std::vector<uint128> row(r + 1, 0);
  row[0] = 1;
  for (int i = 1; i <= n; ++i) {
    for (int j = std::min(i, r); j >= 1; --j) row[j] += row[j - 1];
  }
  return row[r];
}

}  // namespace

TEST(Gegenbauer, DegreeZeroIsOne) { EXPECT_EQ(gegenbauer_eval(30, 0, 7.3), 1.0); }

TEST(Gegenbauer, DegreeOneIsTOverD) { EXPECT_NEAR(gegenbauer_eval(30, 1, 6.0), 0.2, 1e-15); }

TEST(Gegenbauer, DegreeTwoClosedForm) {
  const int d = 10;
  for (double t : {-10.0, -3.7, 0.0, 1.25, 9.9, 10.0}) {
    EXPECT_NEAR(gegenbauer_eval(d, 2, t), (t * t - d) / (d * (d - 1.0)), 1e-14) << t;
  }
  EXPECT_NEAR(gegenbauer_eval(d, 2, d), 1.0, 1e-15);
}

TEST(Gegenbauer, NormalizedAtD) {
  for (int d : {2, 3, 5, 30, 200, 1000}) {
    const GegenbauerEvaluator q(d, 30);
    const auto v = q.evaluate_all(d);
    for (int k = 0; k <= 30; ++k) EXPECT_NEAR(v[k], 1.0, 1e-12) << "d=" << d << " k=" << k;
  }
}

TEST(Gegenbauer, ChebyshevAtD2) {
  for (int k = 0; k <= 12; ++k) {
    for (double t : {-2.0, -1.3, 0.1, 0.77, 1.9}) {
      EXPECT_NEAR(gegenbauer_eval(2, k, t), std::cos(k * std::acos(t / 2.0)), 1e-12) << k << " " << t;
    }
  }
}

TEST(Gegenbauer, LegendreAtD3) {
  for (unsigned k = 0; k <= 12; ++k) {
    for (double t : {-3.0, -1.3, 0.1, 2.2, 2.9}) {
      EXPECT_NEAR(gegenbauer_eval(3, static_cast<int>(k), t), std::legendre(k, t / 3.0), 1e-12) << k << " " << t;
    }
  }
}

TEST(Gegenbauer, RecurrenceResidual) {
  std::mt19937_64 rng(11);
  for (int d : {5, 10, 50, 100}) {
    const GegenbauerEvaluator q(d, 11);
    std::uniform_real_distribution<double> unif(-d, d);
    for (int rep = 0; rep < 200; ++rep) {
      const double t = unif(rng);
      const auto v = q.evaluate_all(t);
      for (int k = 1; k <= 10; ++k) {
        const double s = k / (2.0 * k + d - 2.0), tt = (k + d - 2.0) / (2.0 * k + d - 2.0);
        const double res = t / d * v[k] - s * v[k - 1] - tt * v[k + 1];
        EXPECT_LE(std::abs(res), 1e-10 * std::max(1.0, std::abs(v[k])));
      }
    }
  }
}

TEST(Gegenbauer, RodriguesCrossCheck) {
  std::mt19937_64 rng(7);
  for (int d = 2; d <= 30; ++d) {
    std::uniform_real_distribution<double> unif(-0.999 * d, 0.999 * d);
    for (int k = 0; k <= 4; ++k) {
      for (int rep = 0; rep < 20; ++rep) {
        const double t = unif(rng);
        const double want = static_cast<double>(rodrigues(d, k, t));
        const double got = gegenbauer_eval(d, k, t);
        EXPECT_LE(std::abs(got - want), 1e-8 * std::max(std::abs(want), 1e-3)) << d << " " << k << " " << t;
      }
    }
  }
}

TEST(Gegenbauer, EvaluatorAgreesWithFreeFunction) {
  const GegenbauerEvaluator q(17, 9);
  for (double t : {-16.5, -2.0, 0.3, 11.0}) {
    const auto v = q.evaluate_all(t);
    for (int k = 0; k <= 9; ++k) {
      EXPECT_DOUBLE_EQ(v[k], gegenbauer_eval(17, k, t));
      EXPECT_DOUBLE_EQ(q(k, t), v[k]);
    }
  }
}

TEST(Gegenbauer, Errors) {
  EXPECT_THROW(gegenbauer_eval(10, 2, 10.001), std::domain_error);
  EXPECT_NO_THROW(gegenbauer_eval(10, 2, 10.0 * (1 + 1e-13)));
  EXPECT_THROW(gegenbauer_eval(1, 2, 0.5), std::invalid_argument);
  EXPECT_THROW(gegenbauer_eval(10, -1, 0.5), std::invalid_argument);
  EXPECT_THROW(gegenbauer_eval(10, 2, std::nan("")), std::domain_error);
  const GegenbauerEvaluator q(10, 3);
  EXPECT_THROW(q(4, 0.0), std::out_of_range);
}

TEST(Hermite, Examples) {
  EXPECT_EQ(hermite_eval(0, 2.7), 1.0);
  for (double x : {-2.0, -0.3, 0.0, 1.7}) {
    EXPECT_NEAR(hermite_eval(2, x), x * x - 1.0, 1e-14);
    EXPECT_NEAR(hermite_eval(3, x), x * x * x - 3.0 * x, 1e-13);
    EXPECT_NEAR(hermite_eval(4, x), x * x * x * x - 6.0 * x * x + 3.0, 1e-12);
  }
  EXPECT_THROW(hermite_eval(-1, 0.0), std::invalid_argument);
}

TEST(Hermite, OrthogonalityUnderGaussian) {
  const int K = 10;
  const auto rule = gaussian_rule();
  const HermiteEvaluator he(K);
  double fact = 1.0;
  for (int k = 0; k <= K; ++k) {
    if (k > 0) fact *= k;
    for (int j = 0; j <= K; ++j) {
      const double v = rule.integrate([&](double x) { return he(j, x) * he(k, x); });
      EXPECT_NEAR(v, j == k ? fact : 0.0, 1e-8 * std::max(1.0, fact)) << j << " " << k;
    }
  }
}

TEST(HarmonicDimension, Examples) {
  for (int d : {2, 3, 10, 500}) {
    EXPECT_EQ(dim_harmonics_exact(d, 0), 1u);
    EXPECT_EQ(dim_harmonics_exact(d, 1), static_cast<uint128>(d));
  }
  EXPECT_EQ(dim_harmonics_exact(3, 2), 5u);
  for (int k = 0; k <= 20; ++k) EXPECT_EQ(dim_harmonics_exact(3, k), static_cast<uint128>(2 * k + 1));
  for (int k = 1; k <= 20; ++k) EXPECT_EQ(dim_harmonics_exact(2, k), 2u);
}

TEST(HarmonicDimension, MatchesPolynomialSpaceCount) {
  // B(d,k) = dim of homogeneous degree-k polynomials minus degree k-2.
  for (int d = 2; d <= 60; ++d) {
    for (int k = 0; k <= 20; ++k) {
      const uint128 want = binom_pascal(k + d - 1, d - 1) - binom_pascal(k + d - 3, d - 1);
      EXPECT_TRUE(dim_harmonics_exact(d, k) == want) << d << " " << k;
    }
  }
}

TEST(HarmonicDimension, NonDecreasingInK) {
  for (int d = 2; d <= 200; ++d) {
    for (int k = 0; k < 20; ++k) EXPECT_LE(dim_harmonics_value(d, k), dim_harmonics_value(d, k + 1)) << d << " " << k;
  }
}

TEST(HarmonicDimension, LargeArgumentsSignalOverflow) {
  // Every (d <= 1000, k <= 20) either is exact or falls back explicitly.
  for (int d : {100, 500, 1000}) {
    for (int k = 0; k <= 20; ++k) {
      const auto b = dim_harmonics(d, k);
      const long double want = binom_ld(k + d - 1, d - 1) - binom_ld(k + d - 3, d - 1);
      EXPECT_NEAR(b.value / static_cast<double>(want), 1.0, 1e-9) << d << " " << k;
      if (b.overflowed()) {
        EXPECT_THROW(dim_harmonics_exact(d, k), std::overflow_error);
      } else {
        EXPECT_NEAR(static_cast<double>(*b.exact) / static_cast<double>(want), 1.0, 1e-12);
      }
    }
  }
  EXPECT_FALSE(dim_harmonics(1000, 10).overflowed());
  EXPECT_TRUE(dim_harmonics(5000, 20).overflowed());
  EXPECT_THROW(dim_harmonics(1, 2), std::invalid_argument);
}

TEST(GegenbauerHermiteGap, Examples) {
  for (int d : {5, 20, 320}) EXPECT_EQ(gegenbauer_hermite_gap(d, 0), 0.0);
  EXPECT_NEAR(gegenbauer_hermite_gap(320, 1), 0.0, 1e-14);
  EXPECT_GT(gegenbauer_hermite_gap(20, 3), gegenbauer_hermite_gap(320, 3));
}

TEST(GegenbauerHermiteGap, DecreasesAlongD) {
  for (int k = 2; k <= 5; ++k) {
    const double g20 = gegenbauer_hermite_gap(20, k);
    const double g80 = gegenbauer_hermite_gap(80, k);
    const double g320 = gegenbauer_hermite_gap(320, k);
    EXPECT_GT(g20, g80) << k;
    EXPECT_GT(g80, g320) << k;
  }
}

TEST(GegenbauerHermiteGap, DegreeTwoClosedForm) {
  // Q_2(sqrt(d) x) sqrt(B) = sqrt(B) (d x^2 - d) / (d (d-1)), B = (d+2)(d-1)/2.
  for (int d : {20, 80, 320}) {
    const double b = (d + 2.0) * (d - 1.0) / 2.0;
    const double c = std::sqrt(b) / (d - 1.0);
    const double want = std::abs(c - 1.0 / std::sqrt(2.0));
    EXPECT_NEAR(gegenbauer_hermite_gap(d, 2), want, 1e-12);
  }
}

TEST(GegenbauerHermiteGap, RangeErrors) {
  EXPECT_THROW(gegenbauer_hermite_gap(20, 13), std::overflow_error);
  EXPECT_THROW(gegenbauer_hermite_gap(2001, 3), std::overflow_error);
  EXPECT_NO_THROW(gegenbauer_hermite_gap(2000, 12));
}

TEST(Quadrature, GaussLegendreExactForPolynomials) {
  const GaussLegendre g(20);
  for (int p = 0; p <= 39; ++p) {
    double s = 0.0;
    for (int i = 0; i < 20; ++i) s += g.weights[i] * std::pow(g.nodes[i], p);
    const double want = (p % 2 == 1) ? 0.0 : 2.0 / (p + 1);
    EXPECT_NEAR(s, want, 1e-14) << p;
  }
}

TEST(Quadrature, NonFiniteIntegrandAborts) {
  const auto rule = gaussian_rule();
  try {
    rule.integrate([](double x) { return x > 1.0 ? std::nan("") : 0.0; });
    FAIL() << "expected QuadratureError";
  } catch (const QuadratureError& e) {
    EXPECT_GT(e.node(), 1.0);
    EXPECT_TRUE(std::isnan(e.value()));
  }
}
