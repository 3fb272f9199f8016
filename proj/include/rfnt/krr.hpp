#pragma once

// Kernel ridge regression with a rotationally invariant kernel
// H_ij = h(<x_i, x_j> / d) on S^{d-1}(sqrt d).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rfnt/linmodels.hpp"
#include "rfnt/sphere.hpp"
#include "rfnt/target.hpp"

namespace rfnt {

inline constexpr Eigen::Index default_kernel_cap = 20000;

using KernelFunction = std::function<double(double)>;

struct KernelMatrix {
  Eigen::MatrixXd H;
  double diagonal = 0.0;  // h(1)
};

class SingularKernel : public std::runtime_error {
 public:
  SingularKernel(const std::string& what, double rcond) : std::runtime_error(what), rcond_(rcond) {}
  double rcond() const noexcept { return rcond_; }

 private:
  double rcond_;
};

namespace detail {

template <class Body>
void parallel_blocks(Eigen::Index n, int threads, Body&& body) {
  threads = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (threads == 1) {
    body(Eigen::Index{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  const Eigen::Index step = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const Eigen::Index lo = t * step, hi = std::min(n, lo + step);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] { body(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

/// Clamp to [-1, 1] and round values within 1e-12 of an endpoint onto it, so
/// <x, x> / d evaluates exactly like the assembled diagonal h(1).
inline double snap_correlation(double t) {
  if (t >= 1.0 - 1e-12) return 1.0;
  if (t <= -1.0 + 1e-12) return -1.0;
  return t;
}

}  // namespace detail

/// Cross-kernel h(<a_i, b_j> / d), with correlations snapped to [-1, 1].
template <class Kernel>
Eigen::MatrixXd cross_kernel(const Kernel& h, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const double d = static_cast<double>(A.cols());
  Eigen::MatrixXd G = A * B.transpose() / d;
  return G.unaryExpr([&](double t) { return h(detail::snap_correlation(t)); });
}

/// Symmetric kernel matrix with diagonal exactly h(1), assembled by row
/// blocks across `threads` workers.
template <class Kernel>
KernelMatrix assemble_kernel(const Kernel& h, const Eigen::MatrixXd& X, int threads = 1,
                             Eigen::Index cap = default_kernel_cap) {
  const Eigen::Index n = X.rows();
  if (n > cap) {
    throw std::length_error("kernel matrix of order " + std::to_string(n) + " exceeds cap " + std::to_string(cap));
  }
  const double d = static_cast<double>(X.cols());
  KernelMatrix K;
  K.diagonal = h(1.0);
  K.H.resize(n, n);
  K.H.template triangularView<Eigen::Lower>() = (X * X.transpose() / d).template triangularView<Eigen::Lower>();
  detail::parallel_blocks(n, threads, [&](Eigen::Index lo, Eigen::Index hi) {
    for (Eigen::Index j = lo; j < hi; ++j) {
      for (Eigen::Index i = j + 1; i < n; ++i) K.H(i, j) = h(detail::snap_correlation(K.H(i, j)));
    }
  });
  for (Eigen::Index j = 0; j < n; ++j) {
    K.H(j, j) = K.diagonal;
    for (Eigen::Index i = j + 1; i < n; ++i) K.H(j, i) = K.H(i, j);
  }
  return K;
}

struct KrrOptions {
  /// Throw SingularKernel at lambda = 0 instead of adding jitter.
  bool strict = false;
  /// Subtract the label mean before fitting (added back in predictions),
  /// applied when the kernel has (numerically) zero mean.
  bool center = false;
  std::optional<double> xi0;  // kernel's degree-0 eigenvalue, for the centering test
};

struct KRRModel {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  double lambda = 0.0;            // requested
  double lambda_effective = 0.0;  // used in the solve
  bool jittered = false;
  double offset = 0.0;
  Eigen::VectorXd coef;
  double residual_rel = 0.0;  // ||(H + lambda I) coef - (y - offset)|| / ||y - offset||
  KernelFunction kernel;
  std::vector<std::string> notes;
};

/// coef = (H + lambda I)^{-1} y by Cholesky. At lambda = 0 with a singular
/// H, either throws (strict) or substitutes lambda = 1e-12 h(1) and logs it.
inline KRRModel krr_fit(const KernelMatrix& K, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                        KernelFunction kernel, const KrrOptions& opt = {}) {
  if (lambda < 0.0) throw std::invalid_argument("krr_fit: lambda must be >= 0");
  const Eigen::Index n = K.H.rows();
  if (y.size() != n || X.rows() != n) throw std::invalid_argument("krr_fit: size mismatch");
  KRRModel m;
  m.X = X;
  m.y = y;
  m.lambda = lambda;
  m.kernel = std::move(kernel);
  if (opt.center) {
    const bool zero_mean = !opt.xi0 || std::abs(*opt.xi0) < 1e-9 * std::abs(K.diagonal);
    if (zero_mean) {
      m.offset = y.mean();
      m.notes.push_back("labels centered");
    }
  }
  const Eigen::VectorXd yc = y.array() - m.offset;

  Eigen::MatrixXd A = K.H;
  A.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  double lam = lambda;
  bool ok = llt.info() == Eigen::Success;
  if (ok && lambda == 0.0 && llt.rcond() < 1e-14) ok = false;
  if (!ok) {
    const double rc = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
    if (lambda > 0.0) {
      std::ostringstream os;
      os << "krr_fit: H + lambda I is not positive definite (lambda = " << lambda << ")";
      throw SingularKernel(os.str(), rc);
    }
    if (opt.strict) {
      std::ostringstream os;
      os << "krr_fit: kernel matrix is numerically singular at lambda = 0 (rcond estimate " << rc << ")";
      throw SingularKernel(os.str(), rc);
    }
    lam = 1e-12 * K.diagonal;
    A.diagonal().array() += lam;
    llt.compute(A);
    if (llt.info() != Eigen::Success) throw SingularKernel("krr_fit: jittered kernel still not positive definite", rc);
    m.jittered = true;
    std::ostringstream os;
    os << "lambda = 0 replaced by " << lam << " (rcond estimate " << rc << ")";
    m.notes.push_back(os.str());
  }
  m.lambda_effective = lam;
  m.coef = llt.solve(yc);
  const double ynorm = yc.norm();
  m.residual_rel = ynorm > 0.0 ? (A * m.coef - yc).norm() / ynorm : (A * m.coef).norm();
  return m;
}

/// f(x) = h(X x / d)^T coef + offset, for each row of Xnew.
inline Eigen::VectorXd krr_predict(const KRRModel& m, const Eigen::MatrixXd& Xnew) {
  return (cross_kernel(m.kernel, Xnew, m.X) * m.coef).array() + m.offset;
}

inline double krr_predict(const KRRModel& m, const Eigen::VectorXd& x) {
  return krr_predict(m, Eigen::MatrixXd(x.transpose()))[0];
}

inline RiskEstimate krr_test_risk(const KRRModel& m, const TargetFunction& f, Eigen::Index n_test,
                                  std::uint64_t seed) {
  const SphereSample xs = sample_sphere(n_test, static_cast<int>(m.X.cols()), seed);
  return risk_from_predictions(f, f(xs.points), krr_predict(m, xs.points));
}

struct EmpiricalRisk {
  double closed_form = 0.0;  // lambda^2 ||coef||^2 / n
  double direct = 0.0;       // (1/n) sum (y_i - f(x_i))^2
};

/// Training error in both forms; a mismatch beyond 1e-8 relative is a solver
/// bug and raises std::logic_error.
inline EmpiricalRisk krr_empirical_risk(const KRRModel& m, const KernelMatrix& K) {
  const double n = static_cast<double>(m.y.size());
  EmpiricalRisk r;
  r.closed_form = m.lambda_effective * m.lambda_effective * m.coef.squaredNorm() / n;
  const Eigen::VectorXd fit = (K.H * m.coef).array() + m.offset;
  r.direct = (m.y - fit).squaredNorm() / n;
  const double scale = (m.y.array() - m.offset).square().mean();
  const double tol = 1e-8 * std::max(r.closed_form, r.direct) + 1e-12 * scale;
  if (std::abs(r.closed_form - r.direct) > tol) {
    std::ostringstream os;
    os << "krr_empirical_risk: closed form " << r.closed_form << " and direct " << r.direct << " disagree";
    throw std::logic_error(os.str());
  }
  return r;
}

/// (1 + eps) (||f||^2 + tau^2) (lambda / (lambda + kappa))^2.
inline double interpolator_bound(double f_norm2, double tau2, double lambda, double kappa, double eps) {
  const double q = lambda / (lambda + kappa);
  return (1.0 + eps) * (f_norm2 + tau2) * q * q;
}

}  // namespace rfnt
