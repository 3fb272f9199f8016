#include <gtest/gtest.h>

#include <cmath>

#include "rfnt/sphere.hpp"
#include "rfnt/target.hpp"

using namespace rfnt;

namespace {

double mc_mean(const Eigen::VectorXd& v) { return v.mean(); }
double mc_se(const Eigen::VectorXd& v) {
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / (v.size() - 1.0) / v.size());
}

}  // namespace

TEST(Target, QuadSplitClosedFormNorm) {
  const auto f = quad_split(30);
  EXPECT_NEAR(*f.norm2(), 56.25, 1e-12);
  EXPECT_NEAR(*f.plateau(1), 56.25, 1e-12);
  EXPECT_NEAR(*f.plateau(2), 0.0, 0.0);
  const auto xs = sample_sphere(200000, 30, 1);
  const Eigen::VectorXd y = f(xs.points);
  const Eigen::VectorXd y2 = y.array().square();
  EXPECT_NEAR(mc_mean(y2), 56.25, 4 * mc_se(y2));
  EXPECT_NEAR(mc_mean(y), 0.0, 4 * mc_se(y));
}

TEST(Target, QuadSplitIsCenteredExactlyForEvenD) {
  // Swapping the two halves of the coordinates flips the sign, and the
  // uniform law is invariant under that swap.
  const int d = 10;
  const auto f = quad_split(d);
  const auto xs = sample_sphere(50, d, 2);
  Eigen::MatrixXd swapped(xs.size(), d);
  swapped << xs.points.rightCols(d / 2), xs.points.leftCols(d / 2);
  EXPECT_LT((f(xs.points) + f(swapped)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(f.energies.count(0), 0u);
  EXPECT_EQ(f.parts.size(), 1u);
}

TEST(Target, QuadSplitOddDimension) {
  const int d = 11;
  const auto f = quad_split(d);
  const double want = (2.0 * d * d + d) / (d + 2.0);
  EXPECT_NEAR(*f.norm2(), want, 1e-12);
  EXPECT_NEAR(f.energies.at(0), 1.0, 0.0);
  const auto xs = sample_sphere(200000, d, 3);
  const Eigen::VectorXd y = f(xs.points);
  EXPECT_NEAR(mc_mean(y), -1.0, 4 * mc_se(y));
  const Eigen::VectorXd p2 = f.parts.at(2)(xs.points);
  const Eigen::VectorXd p2sq = p2.array().square();
  EXPECT_NEAR(mc_mean(p2sq), f.energies.at(2), 4 * mc_se(p2sq));
}

TEST(Target, CubicHermiteDecomposition) {
  const int d = 30;
  const auto f = cubic_hermite(d);
  const double dd = d;
  EXPECT_NEAR(f.energies.at(1), 36.0 * dd / ((dd + 2) * (dd + 2)), 1e-12);
  const auto xs = sample_sphere(400000, d, 4);
  const Eigen::VectorXd y = f(xs.points);
  const Eigen::VectorXd y2 = y.array().square();
  EXPECT_NEAR(mc_mean(y2), *f.norm2(), 4 * mc_se(y2));
  EXPECT_NEAR(mc_mean(y), 0.0, 4 * mc_se(y));
  // The degree-3 part is orthogonal to every coordinate.
  const Eigen::VectorXd p3 = f.parts.at(3)(xs.points);
  for (int i : {0, 7, 29}) {
    const Eigen::VectorXd prod = p3.array() * xs.points.col(i).array();
    EXPECT_NEAR(mc_mean(prod), 0.0, 4 * mc_se(prod)) << i;
  }
  const Eigen::VectorXd sum = f.parts.at(1)(xs.points) + p3;
  EXPECT_LT((sum - y).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Target, OddFunction) {
  const auto f = cubic_hermite(12);
  const auto xs = sample_sphere(50, 12, 5);
  const Eigen::VectorXd a = f(xs.points), b = f(-xs.points);
  EXPECT_LT((a + b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Target, SumWithDisjointDegrees) {
  const int d = 30;
  const auto f = quad_split(d) + coordinate_sum(d);
  ASSERT_TRUE(f.energies_complete);
  EXPECT_NEAR(*f.norm2(), 56.25 + 30.0, 1e-12);
  EXPECT_NEAR(*f.plateau(1), 56.25, 1e-12);
  EXPECT_NEAR(*f.low_energy(1), 30.0, 1e-12);
  const auto low = f.low_degree_part(1);
  const auto xs = sample_sphere(10, d, 6);
  EXPECT_LT((low(xs.points) - xs.points.rowwise().sum()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(*low.norm2(), 30.0, 1e-12);
}

TEST(Target, SumWithOverlappingDegreesDropsEnergies) {
  const auto f = coordinate(10, 0) + coordinate(10, 1);
  EXPECT_FALSE(f.energies_complete);
  EXPECT_FALSE(f.norm2().has_value());
  EXPECT_TRUE(f.parts_complete);
  const auto xs = sample_sphere(10, 10, 7);
  const Eigen::VectorXd want = xs.points.col(0) + xs.points.col(1);
  EXPECT_LT((f.parts.at(1)(xs.points) - want).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Target, ScalarMultiple) {
  const auto f = 2.0 * coordinate(5, 3);
  EXPECT_NEAR(*f.norm2(), 4.0, 1e-15);
  const auto xs = sample_sphere(4, 5, 8);
  EXPECT_LT((f(xs.points) - 2.0 * xs.points.col(3)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Target, SingleNeuronParts) {
  const int d = 20;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  w[0] = 1.0;
  const auto f = single_neuron(shifted_relu(0.5), w);
  EXPECT_FALSE(f.energies_complete);
  const auto xs = sample_sphere(2000, d, 9);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(xs.size());
  for (const auto& [k, p] : f.parts) sum += p(xs.points);
  const Eigen::VectorXd err = (sum - f(xs.points)).array().square();
  EXPECT_LT(err.mean(), 1e-3);
}

TEST(Target, ByName) {
  EXPECT_EQ(target_by_name("quad_split", 8).name, "quad_split");
  EXPECT_EQ(target_by_name("cubic_hermite", 8).name, "cubic_hermite");
  EXPECT_TRUE(target_by_name("quad_split+coordinate", 8).energies_complete);
  EXPECT_THROW(target_by_name("nope", 8), std::invalid_argument);
  EXPECT_THROW(quad_split(1), std::invalid_argument);
}
