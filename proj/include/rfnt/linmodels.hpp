#pragma once

// Random-features and neural-tangent linear models: weights, design
// matrices, least-squares fits, test risk, and population risk of RF models.

#include <Eigen/Dense>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfnt/activation.hpp"
#include "rfnt/random.hpp"
#include "rfnt/spectrum.hpp"
#include "rfnt/sphere.hpp"
#include "rfnt/target.hpp"

namespace rfnt {

inline constexpr double default_design_cap = 2e9;

class DesignTooLarge : public std::runtime_error {
 public:
  DesignTooLarge(double entries, double cap)
      : std::runtime_error(message(entries, cap)), entries_(entries), cap_(cap) {}
  double entries() const noexcept { return entries_; }
  double cap() const noexcept { return cap_; }

 private:
  static std::string message(double entries, double cap) {
    std::ostringstream os;
    os << "design matrix needs " << entries << " entries, cap is " << cap;
    return os.str();
  }
  double entries_;
  double cap_;
};

struct FeatureModel {
  enum class Kind { rf, nt, sparse_nn };

  Kind kind = Kind::rf;
  Eigen::MatrixXd W;  // N x d
  ActivationSpec activation;
  std::optional<Eigen::VectorXd> coef;

  Eigen::Index num_neurons() const noexcept { return W.rows(); }
  Eigen::Index dim() const noexcept { return W.cols(); }
  Eigen::Index num_params() const noexcept { return kind == Kind::nt ? W.rows() * W.cols() : W.rows(); }
};

inline const char* kind_name(FeatureModel::Kind k) {
  switch (k) {
    case FeatureModel::Kind::rf: return "rf";
    case FeatureModel::Kind::nt: return "nt";
    case FeatureModel::Kind::sparse_nn: return "nn_sparse";
  }
  return "?";
}

/// N rows i.i.d. uniform on the unit sphere in R^d.
inline Eigen::MatrixXd sample_weights(Eigen::Index N, int d, std::uint64_t seed) {
  return sample_sphere_rows(N, d, 1.0, seed);
}

/// Rows s_i e_{r(i)} with r(i) uniform in {0..d-1} and s_i standard normal.
inline Eigen::MatrixXd sparse_nn_weights(Eigen::Index N, int d, std::uint64_t seed) {
  if (N < 1 || d < 1) throw std::invalid_argument("sparse_nn_weights: N and d must be >= 1");
  Rng rng(seed);
  std::uniform_int_distribution<int> pick(0, d - 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(N, d);
  for (Eigen::Index i = 0; i < N; ++i) {
    const int r = pick(rng);
    W(i, r) = gauss(rng);
  }
  return W;
}

inline FeatureModel make_model(FeatureModel::Kind kind, Eigen::Index N, int d, ActivationSpec act,
                               std::uint64_t seed) {
  FeatureModel m;
  m.kind = kind;
  m.activation = std::move(act);
  m.W = kind == FeatureModel::Kind::sparse_nn ? sparse_nn_weights(N, d, seed) : sample_weights(N, d, seed);
  return m;
}

/// RF / sparse NN: Z_ij = sigma(<w_j, x_i>). NT: Z_{i, j1 d + j2} =
/// x_{i j2} sigma'(<w_j1, x_i>), d contiguous columns per neuron.
inline Eigen::MatrixXd build_design(const FeatureModel& m, const Eigen::MatrixXd& X,
                                    double cap = default_design_cap) {
  if (X.cols() != m.dim()) throw std::invalid_argument("build_design: dimension mismatch");
  const double entries = static_cast<double>(X.rows()) * static_cast<double>(m.num_params());
  if (entries > cap) throw DesignTooLarge(entries, cap);
  Eigen::MatrixXd A = X * m.W.transpose();
  if (m.kind != FeatureModel::Kind::nt) {
    m.activation.apply(A);
    return A;
  }
  m.activation.apply_derivative(A);
  const Eigen::Index n = X.rows(), N = m.W.rows(), d = X.cols();
  Eigen::MatrixXd Z(n, N * d);
  for (Eigen::Index j1 = 0; j1 < N; ++j1) {
    Z.middleCols(j1 * d, d) = A.col(j1).asDiagonal() * X;
  }
  return Z;
}

struct MinNormResult {
  Eigen::VectorXd coef;
  Eigen::Index rank = 0;
  double cutoff = 0.0;  // absolute singular-value threshold
  Eigen::VectorXd singular_values;
};

/// argmin ||a|| among minimizers of ||y - Z a||, by divide-and-conquer SVD
/// with singular values below rcond * s_max treated as zero. Z is consumed.
inline MinNormResult fit_minnorm(Eigen::MatrixXd&& Z, const Eigen::VectorXd& y, double rcond = 1e-10) {
  if (Z.rows() != y.size()) throw std::invalid_argument("fit_minnorm: row mismatch");
  if (!Z.allFinite() || !y.allFinite()) throw std::invalid_argument("fit_minnorm: non-finite input");
  const lapack_int m = static_cast<lapack_int>(Z.rows()), n = static_cast<lapack_int>(Z.cols());
  MinNormResult r;
  if (m == 0 || n == 0) {
    r.coef = Eigen::VectorXd::Zero(n);
    return r;
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(std::max(m, n));
  b.head(m) = y;
  r.singular_values.resize(std::min(m, n));
  lapack_int rank = 0;
  const lapack_int info = LAPACKE_dgelsd(LAPACK_COL_MAJOR, m, n, 1, Z.data(), m, b.data(), std::max(m, n),
                                         r.singular_values.data(), rcond, &rank);
  if (info != 0) {
    throw std::runtime_error("dgelsd failed with info = " + std::to_string(info));
  }
  r.coef = b.head(n);
  r.rank = rank;
  r.cutoff = rcond * r.singular_values[0];
  return r;
}

inline MinNormResult fit_minnorm(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, double rcond = 1e-10) {
  return fit_minnorm(Eigen::MatrixXd(Z), y, rcond);
}

/// Penalty conventions for ridge fits.
///   paper_rf: (1/n) ||y - Z a||^2 + (N lambda / d) ||a||^2
///   plain:    ||y - Z a||^2 + lambda ||a||^2
struct RidgeScaling {
  enum class Kind { paper_rf, plain };
  Kind kind = Kind::plain;
  double N = 1.0;
  double d = 1.0;

  static RidgeScaling plain() { return {}; }
  static RidgeScaling paper_rf(double N, double d) { return {Kind::paper_rf, N, d}; }

  /// lambda' in (Z^T Z + lambda' I) a = Z^T y.
  double effective(double lambda, Eigen::Index n) const {
    return kind == Kind::plain ? lambda : static_cast<double>(n) * N * lambda / d;
  }
};

inline constexpr Eigen::Index ridge_primal_limit = 20000;

/// Closed-form ridge solution. Primal normal equations when p <= n and
/// p <= 2e4, otherwise the n x n dual a = Z^T (Z Z^T + lambda' I)^{-1} y.
inline Eigen::VectorXd fit_ridge(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, double lambda,
                                 const RidgeScaling& scaling = RidgeScaling::plain()) {
  if (lambda < 0.0) throw std::invalid_argument("fit_ridge: lambda must be >= 0");
  if (Z.rows() != y.size()) throw std::invalid_argument("fit_ridge: row mismatch");
  const Eigen::Index n = Z.rows(), p = Z.cols();
  const double lam = scaling.effective(lambda, n);
  if (p <= n && p <= ridge_primal_limit) {
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(p, p);
    G.selfadjointView<Eigen::Lower>().rankUpdate(Z.transpose());
    G.diagonal().array() += lam;
    return G.selfadjointView<Eigen::Lower>().ldlt().solve(Z.transpose() * y);
  }
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  K.selfadjointView<Eigen::Lower>().rankUpdate(Z);
  K.diagonal().array() += lam;
  const Eigen::VectorXd alpha = K.selfadjointView<Eigen::Lower>().ldlt().solve(y);
  return Z.transpose() * alpha;
}

inline Eigen::VectorXd predict(const FeatureModel& m, const Eigen::MatrixXd& X, double cap = default_design_cap) {
  if (!m.coef) throw std::logic_error("predict: model is not fitted");
  return build_design(m, X, cap) * *m.coef;
}

struct RiskEstimate {
  double test_mse = 0.0;
  double R0 = 0.0;
  double normalized_risk = 0.0;
  double stderr_ = 0.0;  // of test_mse
};

/// Normalization R0 = E[f^2]: closed form when registered, else the mean of
/// f^2 over the given sample.
inline double reference_risk(const TargetFunction& f, const Eigen::VectorXd& values) {
  if (auto n2 = f.norm2()) return *n2;
  return values.squaredNorm() / static_cast<double>(values.size());
}

/// Test risk of predictions `yhat` against targets `y`.
inline RiskEstimate risk_from_predictions(const TargetFunction& f, const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& yhat) {
  RiskEstimate r;
  const Eigen::ArrayXd e2 = (y - yhat).array().square();
  const double n = static_cast<double>(y.size());
  r.test_mse = e2.mean();
  r.stderr_ = n > 1 ? std::sqrt((e2 - r.test_mse).square().sum() / (n - 1.0) / n) : 0.0;
  r.R0 = reference_risk(f, y);
  r.normalized_risk = r.test_mse / r.R0;
  return r;
}

/// Monte Carlo test risk on n_test fresh sphere points drawn from `seed`.
inline RiskEstimate estimate_risk(const FeatureModel& m, const TargetFunction& f, Eigen::Index n_test,
                                  std::uint64_t seed) {
  const SphereSample xs = sample_sphere(n_test, static_cast<int>(m.dim()), seed);
  return risk_from_predictions(f, f(xs.points), predict(m, xs.points));
}

struct FitResult {
  Eigen::VectorXd coef;
  double train_mse = 0.0;
  double test_mse = 0.0;
  double R0 = 0.0;
  double normalized_risk = 0.0;
  Eigen::Index rank = 0;
  double cutoff = 0.0;
};

struct PopulationRiskOptions {
  enum class Method { monte_carlo, series };
  Method method = Method::monte_carlo;
  std::size_t draws = 200000;
  std::size_t chunk = 4000;
  std::uint64_t seed = 0;
  int truncation = default_truncation;
  double jitter_rel = 1e-10;
  Eigen::Index max_neurons = 500;  // the N x N solve is dense
};

struct PopulationRisk {
  double risk = 0.0;
  double stderr_ = 0.0;
  Eigen::VectorXd coef;  // U^{-1} V
};

namespace detail {

inline Eigen::MatrixXd solve_psd(Eigen::MatrixXd U, const Eigen::MatrixXd& V, double jitter_rel) {
  const Eigen::Index N = U.rows();
  const double jitter = jitter_rel * U.trace() / static_cast<double>(N);
  U.diagonal().array() += jitter;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(U);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("population risk: factorization failed");
  const double dmin = ldlt.vectorD().minCoeff();
  if (dmin < -jitter) {
    std::ostringstream os;
    os << "population risk: U indefinite beyond jitter (pivot " << dmin << ", jitter " << jitter << ")";
    throw std::runtime_error(os.str());
  }
  return ldlt.solve(V);
}

}  // namespace detail

/// Population risk min_a E_x[(f(x) - sum_i a_i sigma(<theta_i, x>/sqrt d))^2]
/// = ||f||^2 - V^T U^{-1} V for several targets sharing one U.
///
/// theta rows live on S^{d-1}(sqrt d). Monte Carlo: U, V and ||f||^2 come
/// from the same draws, and a second pass over those draws gives the
/// standard error of the residual mean. Series: U_ij = h^{RF}(<theta_i,
/// theta_j>/d), V_i = sum_k lambda_k (P_k f)(theta_i), ||f||^2 closed form.
inline std::vector<PopulationRisk> rf_population_risks(const ActivationSpec& sigma, const Eigen::MatrixXd& theta,
                                                       const std::vector<TargetFunction>& targets,
                                                       const PopulationRiskOptions& opt = {}) {
  const Eigen::Index N = theta.rows();
  const int d = static_cast<int>(theta.cols());
  const Eigen::Index T = static_cast<Eigen::Index>(targets.size());
  if (N > opt.max_neurons) {
    throw std::invalid_argument("population risk: N = " + std::to_string(N) + " exceeds max_neurons = " +
                                std::to_string(opt.max_neurons));
  }
  const Eigen::MatrixXd Wt = theta.transpose() / std::sqrt(static_cast<double>(d));  // d x N
  std::vector<PopulationRisk> out(targets.size());

  if (opt.method == PopulationRiskOptions::Method::series) {
    const RfKernel h(sigma, d, opt.truncation);
    Eigen::MatrixXd U(N, N);
    for (Eigen::Index i = 0; i < N; ++i) {
      U(i, i) = h.mass();
      for (Eigen::Index j = 0; j < i; ++j) U(i, j) = U(j, i) = h.series(theta.row(i).dot(theta.row(j)) / d);
    }
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(N, T);
    for (Eigen::Index t = 0; t < T; ++t) {
      const auto& f = targets[t];
      if (!f.parts_complete || !f.energies_complete) {
        throw std::invalid_argument("series population risk needs closed-form parts of '" + f.name + "'");
      }
      for (const auto& [k, part] : f.parts) {
        if (k > opt.truncation) throw std::invalid_argument("target degree exceeds truncation");
        V.col(t) += h.lambda()[k] * part(theta);
      }
    }
    const Eigen::MatrixXd A = detail::solve_psd(U, V, opt.jitter_rel);
    for (Eigen::Index t = 0; t < T; ++t) {
      out[t].coef = A.col(t);
      out[t].risk = *targets[t].norm2() - V.col(t).dot(A.col(t));
    }
    return out;
  }

  if (opt.draws < 2 || opt.chunk < 1) throw std::invalid_argument("population risk: need >= 2 draws");
  const auto for_each_chunk = [&](auto&& body) {
    std::size_t done = 0;
    std::uint64_t c = 0;
    while (done < opt.draws) {
      const std::size_t m = std::min(opt.chunk, opt.draws - done);
      const SphereSample xs = sample_sphere(static_cast<Eigen::Index>(m), d, derive_seed(opt.seed, c));
      Eigen::MatrixXd S = xs.points * Wt;
      sigma.apply(S);
      Eigen::MatrixXd F(m, T);
      for (Eigen::Index t = 0; t < T; ++t) F.col(t) = targets[t](xs.points);
      body(S, F);
      done += m;
      ++c;
    }
  };

  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(N, N);
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(N, T);
  Eigen::VectorXd f2 = Eigen::VectorXd::Zero(T);
  for_each_chunk([&](const Eigen::MatrixXd& S, const Eigen::MatrixXd& F) {
    U.selfadjointView<Eigen::Lower>().rankUpdate(S.transpose());
    V.noalias() += S.transpose() * F;
    f2 += F.colwise().squaredNorm().transpose();
  });
  const double M = static_cast<double>(opt.draws);
  U = U.selfadjointView<Eigen::Lower>();
  U /= M;
  V /= M;
  f2 /= M;
  const Eigen::MatrixXd A = detail::solve_psd(U, V, opt.jitter_rel);

  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(T), s2 = Eigen::VectorXd::Zero(T);
  for_each_chunk([&](const Eigen::MatrixXd& S, const Eigen::MatrixXd& F) {
    const Eigen::ArrayXXd r2 = (F - S * A).array().square();
    s1 += r2.colwise().sum().matrix().transpose();
    s2 += r2.square().colwise().sum().matrix().transpose();
  });
  for (Eigen::Index t = 0; t < T; ++t) {
    out[t].coef = A.col(t);
    out[t].risk = f2[t] - V.col(t).dot(A.col(t));
    const double mean = s1[t] / M;
    const double var = std::max(0.0, (s2[t] / M - mean * mean) * M / (M - 1.0));
    out[t].stderr_ = std::sqrt(var / M);
  }
  return out;
}

inline PopulationRisk rf_population_risk(const ActivationSpec& sigma, const Eigen::MatrixXd& theta,
                                         const TargetFunction& f, const PopulationRiskOptions& opt = {}) {
  return rf_population_risks(sigma, theta, {f}, opt).front();
}

}  // namespace rfnt
