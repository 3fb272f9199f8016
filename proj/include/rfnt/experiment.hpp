#pragma once

// Sweep configuration, the parallel sweep runner, CSV output, the
// approximation staircase, spectrum and Gram dumps, and packaged checks of
// the asymptotic risk predictions at desk scale.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rfnt/activation.hpp"
#include "rfnt/krr.hpp"
#include "rfnt/labkit.hpp"
#include "rfnt/linmodels.hpp"
#include "rfnt/projection.hpp"
#include "rfnt/random.hpp"
#include "rfnt/spectrum.hpp"
#include "rfnt/sphere.hpp"
#include "rfnt/target.hpp"

extern "C" void openblas_set_num_threads(int);

namespace rfnt {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration

struct ExperimentConfig {
  std::string model = "rf";  // rf | nt | krr | nn_sparse
  std::string target = "quad_split";
  int d = 0;
  std::vector<long long> N;
  std::vector<long long> n;
  std::vector<double> lambda{0.0};
  std::string solver = "minnorm";  // minnorm | ridge
  std::string ridge_scaling = "paper_rf";
  std::string activation = "shifted_relu";
  double u0 = 0.5;
  double tau2 = 0.0;
  int repetitions = 1;
  std::uint64_t seed = 0;
  std::string output;
  long long n_test = 1500;
  std::string kernel = "rf";             // krr: rf | nt
  std::string lambda_scale = "absolute";  // krr: absolute | lambda_star
  int ell = 1;
  std::string method = "series";  // staircase population risk: series | monte_carlo
  long long draws = 200000;
  int truncation = default_truncation;
  long long max_neurons = 500;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline double parse_number(const std::string& tok, const std::string& key) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse '" + tok + "' as a number");
  }
  if (pos != tok.size() || !std::isfinite(v)) throw ConfigError("key '" + key + "': bad number '" + tok + "'");
  return v;
}

/// Sizes: plain numbers (2e4), multiples of d (8d, 0.5d), or powers (d^2, 3d^1.5).
inline long long parse_size(const std::string& tok, int d, const std::string& key) {
  double v = 0.0;
  const auto p = tok.find('d');
  if (p == std::string::npos) {
    v = parse_number(tok, key);
  } else {
    if (d < 1) throw ConfigError("key '" + key + "': '" + tok + "' needs d to be set");
    const double c = p == 0 ? 1.0 : parse_number(tok.substr(0, p), key);
    double e = 1.0;
    if (p + 1 < tok.size()) {
      if (tok[p + 1] != '^') throw ConfigError("key '" + key + "': bad size '" + tok + "'");
      e = parse_number(tok.substr(p + 2), key);
    }
    v = c * std::pow(static_cast<double>(d), e);
  }
  const double r = std::round(v);
  if (r < 1.0 || std::abs(v - r) > 1e-9 * std::max(1.0, r)) {
    throw ConfigError("key '" + key + "': '" + tok + "' is not a positive integer");
  }
  return static_cast<long long>(r);
}

inline long long parse_integer(const std::string& tok, const std::string& key) {
  const double v = parse_number(tok, key);
  if (v != std::floor(v)) throw ConfigError("key '" + key + "': '" + tok + "' is not an integer");
  return static_cast<long long>(v);
}

}  // namespace detail

/// Checks the invariants of a configuration; throws ConfigError.
inline void validate(const ExperimentConfig& c) {
  static const std::set<std::string> models{"rf", "nt", "krr", "nn_sparse"};
  if (!models.count(c.model)) throw ConfigError("model must be one of rf, nt, krr, nn_sparse");
  if (c.d < 2) throw ConfigError("d must be >= 2");
  if (c.repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (c.n.empty()) throw ConfigError("n grid is empty");
  if (c.lambda.empty()) throw ConfigError("lambda grid is empty");
  if (c.model != "krr" && c.N.empty()) throw ConfigError("N grid is empty");
  if (c.solver != "minnorm" && c.solver != "ridge") throw ConfigError("solver must be minnorm or ridge");
  if (c.ridge_scaling != "paper_rf" && c.ridge_scaling != "plain") {
    throw ConfigError("ridge_scaling must be paper_rf or plain");
  }
  if (c.kernel != "rf" && c.kernel != "nt") throw ConfigError("kernel must be rf or nt");
  if (c.lambda_scale != "absolute" && c.lambda_scale != "lambda_star") {
    throw ConfigError("lambda_scale must be absolute or lambda_star");
  }
  if (c.method != "series" && c.method != "monte_carlo") throw ConfigError("method must be series or monte_carlo");
  for (double l : c.lambda)
    if (l < 0.0) throw ConfigError("lambda values must be >= 0");
  if (c.model != "krr" && c.solver == "minnorm") {
    for (double l : c.lambda)
      if (l != 0.0) throw ConfigError("solver minnorm takes no penalty; set lambda = 0 or solver = ridge");
  }
  if (c.tau2 < 0.0) throw ConfigError("tau2 must be >= 0");
  if (c.n_test < 2) throw ConfigError("n_test must be >= 2");
  if (c.ell < 0) throw ConfigError("ell must be >= 0");
  try {
    target_by_name(c.target, c.d);
    activation_by_name(c.activation, c.u0);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

/// Flat `key = value` text with `#` comments. Grids are comma or space
/// separated. Sizes accept multiples and powers of d (8d, d^2).
inline ExperimentConfig parse_config(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty() || val.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
    if (kv.count(key)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv[key] = val;
  }

  ExperimentConfig c;
  const auto take = [&](const std::string& k) -> std::optional<std::string> {
    auto it = kv.find(k);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  if (auto v = take("d")) c.d = static_cast<int>(detail::parse_integer(*v, "d"));
  if (auto v = take("model")) c.model = *v;
  if (auto v = take("target")) c.target = *v;
  if (auto v = take("N")) {
    c.N.clear();
    for (const auto& t : detail::split_list(*v)) c.N.push_back(detail::parse_size(t, c.d, "N"));
  }
  if (auto v = take("n")) {
    c.n.clear();
    for (const auto& t : detail::split_list(*v)) c.n.push_back(detail::parse_size(t, c.d, "n"));
  }
  if (auto v = take("lambda")) {
    c.lambda.clear();
    for (const auto& t : detail::split_list(*v)) c.lambda.push_back(detail::parse_number(t, "lambda"));
  }
  if (auto v = take("solver")) c.solver = *v;
  if (auto v = take("ridge_scaling")) c.ridge_scaling = *v;
  if (auto v = take("activation")) c.activation = *v;
  if (auto v = take("u0")) c.u0 = detail::parse_number(*v, "u0");
  if (auto v = take("tau2")) c.tau2 = detail::parse_number(*v, "tau2");
  if (auto v = take("repetitions")) c.repetitions = static_cast<int>(detail::parse_integer(*v, "repetitions"));
  if (auto v = take("seed")) {
    const long long s = detail::parse_integer(*v, "seed");
    if (s < 0) throw ConfigError("seed must be >= 0");
    c.seed = static_cast<std::uint64_t>(s);
  }
  if (auto v = take("output")) c.output = *v;
  if (auto v = take("n_test")) c.n_test = detail::parse_size(*v, c.d, "n_test");
  if (auto v = take("kernel")) c.kernel = *v;
  if (auto v = take("lambda_scale")) c.lambda_scale = *v;
  if (auto v = take("ell")) c.ell = static_cast<int>(detail::parse_integer(*v, "ell"));
  if (auto v = take("method")) c.method = *v;
  if (auto v = take("draws")) c.draws = detail::parse_size(*v, c.d, "draws");
  if (auto v = take("truncation")) c.truncation = static_cast<int>(detail::parse_integer(*v, "truncation"));
  if (auto v = take("max_neurons")) c.max_neurons = detail::parse_size(*v, c.d, "max_neurons");
  if (!kv.empty()) throw ConfigError("unknown key '" + kv.begin()->first + "'");
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse_config(in);
}

// ---------------------------------------------------------------------------
// Records and CSV

inline constexpr const char* run_header =
    "model,target,d,N,p,n,lambda,seed,train_mse,test_mse,R0,normalized_risk,elapsed_s";

struct RunRecord {
  std::string model;
  std::string target;
  int d = 0;
  long long N = 0;
  long long p = 0;
  long long n = 0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double train_mse = std::numeric_limits<double>::quiet_NaN();
  double test_mse = std::numeric_limits<double>::quiet_NaN();
  double R0 = std::numeric_limits<double>::quiet_NaN();
  double normalized_risk = std::numeric_limits<double>::quiet_NaN();
  double elapsed_s = 0.0;
  std::string error;  // empty on success
};

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// One line per record; elapsed_s is written as 0 unless `timing` is set so
/// that repeated runs are byte-identical.
inline void write_run_csv(std::ostream& os, const std::vector<RunRecord>& recs, bool timing = false) {
  os << run_header << '\n';
  for (const auto& r : recs) {
    os << r.model << ',' << r.target << ',' << r.d << ',' << r.N << ',' << r.p << ',' << r.n << ','
       << format_double(r.lambda) << ',' << r.seed << ',' << format_double(r.train_mse) << ','
       << format_double(r.test_mse) << ',' << format_double(r.R0) << ',' << format_double(r.normalized_risk) << ','
       << (timing ? format_double(r.elapsed_s) : "0") << '\n';
  }
}

/// Sidecar listing failed rows: row,message (row is 1-based, excluding the header).
inline void write_errors_csv(std::ostream& os, const std::vector<RunRecord>& recs) {
  os << "row,message\n";
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (recs[i].error.empty()) continue;
    std::string msg = recs[i].error;
    std::replace(msg.begin(), msg.end(), '"', '\'');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    os << i + 1 << ",\"" << msg << "\"\n";
  }
}

// ---------------------------------------------------------------------------
// Sweep

struct SweepTask {
  long long N = 0;  // 0 for krr
  long long n = 0;
  double lambda = 0.0;
  int rep = 0;
};

/// Tasks in output order: N, then n, then lambda, then repetition.
inline std::vector<SweepTask> sweep_tasks(const ExperimentConfig& c) {
  std::vector<SweepTask> out;
  const std::vector<long long> Ns = c.model == "krr" ? std::vector<long long>{0} : c.N;
  for (long long N : Ns)
    for (long long n : c.n)
      for (double l : c.lambda)
        for (int r = 0; r < c.repetitions; ++r) out.push_back({N, n, l, r});
  return out;
}

/// The seed of repetition r; every random stream of that repetition derives
/// from it, so all grid points of one repetition share weights, training
/// points (nested prefixes in n), noise and test points.
inline std::uint64_t repetition_seed(std::uint64_t master, int rep) {
  return derive_seed(master, static_cast<std::uint64_t>(rep));
}

namespace detail {

inline Eigen::VectorXd predict_chunked(const FeatureModel& m, const Eigen::MatrixXd& X, Eigen::Index chunk = 2048) {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index s = 0; s < X.rows(); s += chunk) {
    const Eigen::Index len = std::min(chunk, X.rows() - s);
    out.segment(s, len) = predict(m, X.middleRows(s, len));
  }
  return out;
}

inline Eigen::VectorXd gaussian_noise(Eigen::Index n, double sd, std::uint64_t seed) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  if (sd == 0.0) return e;
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  for (Eigen::Index i = 0; i < n; ++i) e[i] = g(rng);
  return e;
}

inline FeatureModel::Kind feature_kind(const std::string& model) {
  if (model == "nt") return FeatureModel::Kind::nt;
  if (model == "nn_sparse") return FeatureModel::Kind::sparse_nn;
  return FeatureModel::Kind::rf;
}

}  // namespace detail

struct SweepData {
  Eigen::MatrixXd X;  // n_max training points
  Eigen::VectorXd y;  // labels with noise
  Eigen::MatrixXd X_test;
  Eigen::VectorXd f_test;
};

/// Training and test draws for one repetition.
inline SweepData sweep_data(const ExperimentConfig& c, const TargetFunction& f, int rep) {
  const std::uint64_t s = repetition_seed(c.seed, rep);
  const long long n_max = *std::max_element(c.n.begin(), c.n.end());
  SweepData D;
  D.X = sample_sphere(n_max, c.d, derive_seed(s, Stream::train)).points;
  D.y = f(D.X) + detail::gaussian_noise(n_max, std::sqrt(c.tau2), derive_seed(s, Stream::noise));
  D.X_test = sample_sphere(c.n_test, c.d, derive_seed(s, Stream::test)).points;
  D.f_test = f(D.X_test);
  return D;
}

/// Runs one task. Failures are returned as a record with NaN metrics and the
/// message in `error`.
inline RunRecord run_task(const ExperimentConfig& c, const SweepTask& t, double design_cap = default_design_cap) {
  RunRecord r;
  r.model = c.model;
  r.target = c.target;
  r.d = c.d;
  r.N = t.N;
  r.n = t.n;
  r.lambda = t.lambda;
  r.seed = repetition_seed(c.seed, t.rep);
  const auto start = std::chrono::steady_clock::now();
  try {
    const TargetFunction f = target_by_name(c.target, c.d);
    const ActivationSpec act = activation_by_name(c.activation, c.u0);
    const SweepData D = sweep_data(c, f, t.rep);
    const Eigen::MatrixXd X = D.X.topRows(t.n);
    const Eigen::VectorXd y = D.y.head(t.n);
    Eigen::VectorXd pred;

    if (c.model == "krr") {
      KernelFunction h;
      KernelSpectrum spec(c.d, {1.0}, 1.0);
      if (c.kernel == "rf") {
        RfKernel k(act, c.d, c.truncation);
        spec = k.spectrum();
        h = k;
      } else {
        NtKernel k(act, c.d, c.truncation);
        spec = k.spectrum();
        h = k;
      }
      if (c.lambda_scale == "lambda_star") r.lambda = t.lambda * spec.lambda_star(c.ell);
      r.p = t.n;
      const KernelMatrix K = assemble_kernel(h, X);
      const KRRModel m = krr_fit(K, X, y, r.lambda, h);
      r.train_mse = krr_empirical_risk(m, K).direct;
      pred = krr_predict(m, D.X_test);
    } else {
      FeatureModel m = make_model(detail::feature_kind(c.model), t.N, c.d, act,
                                  derive_seed(r.seed, Stream::weights));
      r.p = m.num_params();
      {
        Eigen::MatrixXd Z = build_design(m, X, design_cap);
        if (c.solver == "minnorm") {
          m.coef = fit_minnorm(std::move(Z), y).coef;
        } else {
          const RidgeScaling sc = c.ridge_scaling == "plain"
                                      ? RidgeScaling::plain()
                                      : RidgeScaling::paper_rf(static_cast<double>(t.N), static_cast<double>(c.d));
          m.coef = fit_ridge(Z, y, t.lambda, sc);
        }
      }
      r.train_mse = (y - detail::predict_chunked(m, X)).squaredNorm() / static_cast<double>(t.n);
      pred = detail::predict_chunked(m, D.X_test);
    }
    const RiskEstimate risk = risk_from_predictions(f, D.f_test, pred);
    r.test_mse = risk.test_mse;
    r.R0 = risk.R0;
    r.normalized_risk = risk.normalized_risk;
  } catch (const std::exception& e) {
    r.train_mse = r.test_mse = r.R0 = r.normalized_risk = std::numeric_limits<double>::quiet_NaN();
    r.error = e.what();
  }
  r.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

using ProgressFn = std::function<void(std::size_t index, const RunRecord&)>;

/// Executes every task on `threads` workers that pull tasks from a shared
/// counter. Records come back in task order, so the output does not depend
/// on the thread count.
template <class Task, class Result, class Fn>
std::vector<Result> run_pool(const std::vector<Task>& tasks, int threads, Fn&& fn) {
  std::vector<Result> out(tasks.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) out[i] = fn(i, tasks[i]);
  };
  threads = std::max(1, std::min<int>(threads, static_cast<int>(tasks.size())));
  if (threads == 1) {
    worker();
    return out;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return out;
}

inline std::vector<RunRecord> run_sweep(const ExperimentConfig& c, int threads = 1, const ProgressFn& progress = {}) {
  validate(c);
  openblas_set_num_threads(1);
  const auto tasks = sweep_tasks(c);
  std::mutex mu;
  return run_pool<SweepTask, RunRecord>(tasks, threads, [&](std::size_t i, const SweepTask& t) {
    RunRecord r = run_task(c, t);
    if (progress) {
      std::lock_guard<std::mutex> lock(mu);
      progress(i, r);
    }
    return r;
  });
}

// ---------------------------------------------------------------------------
// Staircase

inline constexpr const char* staircase_header =
    "model,target,d,N,p,logN_over_logd,seed,risk,stderr,R0,normalized_risk";

struct StaircaseRecord {
  std::string model;
  std::string target;
  int d = 0;
  long long N = 0;
  long long p = 0;
  double x = 0.0;  // log p / log d
  std::uint64_t seed = 0;
  double risk = std::numeric_limits<double>::quiet_NaN();
  double stderr_ = std::numeric_limits<double>::quiet_NaN();
  double R0 = std::numeric_limits<double>::quiet_NaN();
  double normalized_risk = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

inline void write_staircase_csv(std::ostream& os, const std::vector<StaircaseRecord>& recs) {
  os << staircase_header << '\n';
  for (const auto& r : recs) {
    os << r.model << ',' << r.target << ',' << r.d << ',' << r.N << ',' << r.p << ',' << format_double(r.x) << ','
       << r.seed << ',' << format_double(r.risk) << ',' << format_double(r.stderr_) << ',' << format_double(r.R0)
       << ',' << format_double(r.normalized_risk) << '\n';
  }
}

/// Approximation risk against the parameter count. RF uses the population
/// risk (N <= max_neurons); NT and sparse NN use a min-norm fit on n[0]
/// samples evaluated on n_test fresh points. x = log p / log d.
inline std::vector<StaircaseRecord> staircase(const ExperimentConfig& c, int threads = 1) {
  validate(c);
  if (c.model == "krr") throw ConfigError("staircase needs model rf, nt or nn_sparse");
  openblas_set_num_threads(1);
  struct Item {
    long long N;
    int rep;
  };
  std::vector<Item> items;
  for (long long N : c.N)
    for (int r = 0; r < c.repetitions; ++r) items.push_back({N, r});
  return run_pool<Item, StaircaseRecord>(items, threads, [&](std::size_t, const Item& it) {
    StaircaseRecord s;
    s.model = c.model;
    s.target = c.target;
    s.d = c.d;
    s.N = it.N;
    s.seed = repetition_seed(c.seed, it.rep);
    try {
      const TargetFunction f = target_by_name(c.target, c.d);
      const ActivationSpec act = activation_by_name(c.activation, c.u0);
      const auto kind = detail::feature_kind(c.model);
      s.p = kind == FeatureModel::Kind::nt ? it.N * c.d : it.N;
      s.x = std::log(static_cast<double>(s.p)) / std::log(static_cast<double>(c.d));
      if (kind == FeatureModel::Kind::rf) {
        const Eigen::MatrixXd theta =
            std::sqrt(static_cast<double>(c.d)) * sample_weights(it.N, c.d, derive_seed(s.seed, Stream::weights));
        PopulationRiskOptions opt;
        opt.method = c.method == "series" ? PopulationRiskOptions::Method::series
                                          : PopulationRiskOptions::Method::monte_carlo;
        opt.draws = static_cast<std::size_t>(c.draws);
        opt.seed = derive_seed(s.seed, Stream::population);
        opt.truncation = c.truncation;
        opt.max_neurons = c.max_neurons;
        const auto pr = rf_population_risk(act, theta, f, opt);
        s.risk = pr.risk;
        s.stderr_ = pr.stderr_;
        s.R0 = f.norm2() ? *f.norm2() : std::numeric_limits<double>::quiet_NaN();
      } else {
        FeatureModel m = make_model(kind, it.N, c.d, act, derive_seed(s.seed, Stream::weights));
        const long long n = c.n.front();
        const Eigen::MatrixXd X = sample_sphere(n, c.d, derive_seed(s.seed, Stream::train)).points;
        m.coef = fit_minnorm(build_design(m, X), f(X)).coef;
        const Eigen::MatrixXd Xt = sample_sphere(c.n_test, c.d, derive_seed(s.seed, Stream::test)).points;
        const Eigen::VectorXd ft = f(Xt);
        const auto risk = risk_from_predictions(f, ft, detail::predict_chunked(m, Xt));
        s.risk = risk.test_mse;
        s.stderr_ = risk.stderr_;
        s.R0 = risk.R0;
      }
      s.normalized_risk = s.risk / s.R0;
    } catch (const std::exception& e) {
      s.error = e.what();
    }
    return s;
  });
}

// ---------------------------------------------------------------------------
// Spectrum and Gram dumps

inline constexpr const char* spectrum_header = "d,k,xi,B,xi_times_B";

/// Kernel eigenvalues xi_k and multiplicities for each d in `dims`.
inline void write_spectrum_csv(std::ostream& os, const ActivationSpec& act, const std::string& kernel,
                               const std::vector<int>& dims, int K) {
  os << spectrum_header << '\n';
  for (int d : dims) {
    const KernelSpectrum spec =
        kernel == "nt" ? NtKernel(act, d, K + 1).spectrum() : RfKernel(act, d, K).spectrum();
    for (int k = 0; k <= std::min(K, spec.max_degree()); ++k) {
      const HarmonicDimension B = dim_harmonics(d, k);
      std::string b;
      if (B.exact && *B.exact <= static_cast<uint128>(std::numeric_limits<std::uint64_t>::max())) {
        b = std::to_string(static_cast<std::uint64_t>(*B.exact));
      } else {
        b = format_double(B.value);
      }
      os << d << ',' << k << ',' << format_double(spec.xi(k)) << ',' << b << ','
         << format_double(spec.xi(k) * B.value) << '\n';
    }
  }
}

inline constexpr const char* gram_header = "d,k,N,seed,opnorm_deviation";

inline void write_gram_csv(std::ostream& os, const std::vector<GramDiagnostic>& gs) {
  os << gram_header << '\n';
  for (const auto& g : gs) {
    for (std::size_t r = 0; r < g.values.size(); ++r) {
      os << g.d << ',' << g.k << ',' << g.N << ',' << g.seeds[r] << ',' << format_double(g.values[r]) << '\n';
    }
  }
}

inline constexpr const char* plateau_header = "target,d,ell,plateau,norm2,normalized_plateau";

/// Reference levels ||P_{>l} f||^2 / ||f||^2 for plots.
inline void write_plateau_csv(std::ostream& os, const std::vector<std::string>& targets, const std::vector<int>& dims,
                              const std::vector<int>& ells) {
  os << plateau_header << '\n';
  for (const auto& name : targets) {
    for (int d : dims) {
      const auto f = target_by_name(name, d);
      if (!f.energies_complete) throw std::invalid_argument("target '" + name + "' has no closed-form energies");
      for (int l : ells) {
        const double p = *f.plateau(l), n2 = *f.norm2();
        os << name << ',' << d << ',' << l << ',' << format_double(p) << ',' << format_double(n2) << ','
           << format_double(p / n2) << '\n';
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Checks

struct CheckReport {
  std::string name;
  bool passed = false;
  std::vector<std::string> lines;  // measured vs threshold

  void add(const std::string& s) { lines.push_back(s); }
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

namespace detail {

inline std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

}  // namespace detail

struct DecompositionOptions {
  int d = 30;
  Eigen::Index N = 500;
  std::size_t draws = 200000;
  int seeds = 3;
  double tol = 0.1;
  std::uint64_t seed = 1;
};

/// R(f) - R(P_{<=1} f) against ||P_{>1} f||^2 for f = quad_split +
/// coordinate_sum, population risks by Monte Carlo over shared draws.
inline CheckReport check_rf_decomposition(const DecompositionOptions& o = {}) {
  openblas_set_num_threads(1);
  CheckReport rep{"rf_decomposition", true, {}};
  const auto sigma = shifted_relu(0.5);
  const TargetFunction f = quad_split(o.d) + coordinate_sum(o.d);
  const TargetFunction low = coordinate_sum(o.d);
  const double plateau = *f.plateau(1);
  const double thr = o.tol * std::sqrt(*f.norm2()) * std::sqrt(plateau);
  const auto proj = project_low_degree(f, 1, o.d, 100000, derive_seed(o.seed, Stream::projection));
  rep.add(detail::fmt("||P>1 f||^2 closed form %.6g, least-squares estimate %.6g +- %.2g", plateau,
                      proj.residual_norm2, proj.residual_stderr));
  for (int s = 0; s < o.seeds; ++s) {
    const std::uint64_t rs = repetition_seed(o.seed, s);
    const Eigen::MatrixXd theta =
        std::sqrt(static_cast<double>(o.d)) * sample_weights(o.N, o.d, derive_seed(rs, Stream::weights));
    PopulationRiskOptions opt;
    opt.draws = o.draws;
    opt.seed = derive_seed(rs, Stream::population);
    opt.max_neurons = o.N;
    const auto r = rf_population_risks(sigma, theta, {f, low}, opt);
    const double gap = r[0].risk - r[1].risk - plateau;
    const double mc = 3.0 * std::hypot(r[0].stderr_, r[1].stderr_);
    const bool ok = std::abs(gap) <= thr + mc;
    rep.passed = rep.passed && ok;
    rep.add(detail::fmt("seed %d: R(f) = %.6g, R(P<=1 f) = %.6g, gap = %.6g, |gap| <= %.6g (+ MC %.3g): %s", s,
                        r[0].risk, r[1].risk, gap, thr, mc, ok ? "pass" : "FAIL"));
  }
  return rep;
}

struct KrrCheckOptions {
  int d = 50;
  Eigen::Index n = 800;
  double tau = 0.1;
  int ell = 1;
  int seeds = 5;
  Eigen::Index n_test = 5000;
  std::vector<double> plateau_factors{0.5};
  std::vector<double> bound_factors{0.1, 0.5, 0.9};
  double plateau_tol = 0.2;
  double eps = 0.2;
  std::uint64_t seed = 2;
};

namespace detail {

struct KrrSetting {
  TargetFunction f;
  RfKernel h;
  double ls;
  double kappa;
};

inline KrrSetting krr_setting(const KrrCheckOptions& o) {
  KrrSetting s{quad_split(o.d) + coordinate(o.d, 0), RfKernel(shifted_relu(0.5), o.d), 0.0, 0.0};
  s.ls = s.h.spectrum().lambda_star(o.ell);
  s.kappa = s.h.spectrum().kappa_tail(o.ell);
  return s;
}

inline void krr_draw(const KrrCheckOptions& o, const TargetFunction& f, int s, Eigen::MatrixXd& X,
                     Eigen::VectorXd& y) {
  const std::uint64_t rs = repetition_seed(o.seed, s);
  X = sample_sphere(o.n, o.d, derive_seed(rs, Stream::train)).points;
  y = f(X) + gaussian_noise(o.n, o.tau, derive_seed(rs, Stream::noise));
}

}  // namespace detail

/// Median KRR test risk at lambda = c lambda_* against ||P_{>ell} f||^2.
inline CheckReport check_krr_plateau(const KrrCheckOptions& o = {}) {
  openblas_set_num_threads(1);
  CheckReport rep{"krr_plateau", true, {}};
  const auto S = detail::krr_setting(o);
  const double plateau = *S.f.plateau(o.ell);
  const double scale = *S.f.norm2() + o.tau * o.tau;
  const double thr = o.plateau_tol * scale;
  rep.add(detail::fmt("lambda_* = %.6g, ||P>%d f||^2 = %.6g, ||f||^2 + tau^2 = %.6g", S.ls, o.ell, plateau, scale));
  for (double c : o.plateau_factors) {
    std::vector<double> risks;
    for (int s = 0; s < o.seeds; ++s) {
      Eigen::MatrixXd X;
      Eigen::VectorXd y;
      detail::krr_draw(o, S.f, s, X, y);
      const KernelMatrix K = assemble_kernel(S.h, X);
      const KRRModel m = krr_fit(K, X, y, c * S.ls, S.h);
      const double r = krr_test_risk(m, S.f, o.n_test, derive_seed(repetition_seed(o.seed, s), Stream::test)).test_mse;
      risks.push_back(r);
      rep.add(detail::fmt("lambda = %.3g lambda_*, seed %d: R_KR = %.6g", c, s, r));
    }
    const double med = median_of(risks);
    const bool ok = std::abs(med - plateau) <= thr;
    rep.passed = rep.passed && ok;
    rep.add(detail::fmt("lambda = %.3g lambda_*: median R_KR = %.6g, |median - plateau| = %.6g <= %.6g: %s", c, med,
                        std::abs(med - plateau), thr, ok ? "pass" : "FAIL"));
  }
  return rep;
}

/// Training error against (1 + eps)(||f||^2 + tau^2)(lambda / (lambda + kappa))^2.
inline CheckReport check_interpolator_bound(const KrrCheckOptions& o = {}) {
  openblas_set_num_threads(1);
  CheckReport rep{"interpolator_bound", true, {}};
  const auto S = detail::krr_setting(o);
  const double f2 = *S.f.norm2(), tau2 = o.tau * o.tau;
  rep.add(detail::fmt("lambda_* = %.6g, kappa_h = %.6g (complement form)", S.ls, S.kappa));
  for (int s = 0; s < o.seeds; ++s) {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    detail::krr_draw(o, S.f, s, X, y);
    const KernelMatrix K = assemble_kernel(S.h, X);
    for (double c : o.bound_factors) {
      const KRRModel m = krr_fit(K, X, y, c * S.ls, S.h);
      const double emp = krr_empirical_risk(m, K).closed_form;
      const double bound = interpolator_bound(f2, tau2, m.lambda_effective, S.kappa, o.eps);
      const bool ok = emp <= bound;
      rep.passed = rep.passed && ok;
      rep.add(detail::fmt("seed %d, lambda = %.3g lambda_*: R_emp = %.6g <= %.6g: %s", s, c, emp, bound,
                          ok ? "pass" : "FAIL"));
    }
  }
  return rep;
}

struct GramCheckOptions {
  int d = 100;
  int k = 2;
  Eigen::Index N = 100;
  int reps = 5;
  int min_pass = 4;
  double threshold = 0.5;
  std::vector<int> dims{50, 100, 200};
  std::uint64_t seed = 3;
};

/// ||W - I||_op <= threshold in at least min_pass of reps, and the median
/// decreasing along dims.
inline CheckReport check_gram_concentration(const GramCheckOptions& o = {}) {
  CheckReport rep{"gram_concentration", true, {}};
  const GramDiagnostic g = gram_diagnostic(o.d, o.k, o.N, o.reps, o.seed);
  int hits = 0;
  for (std::size_t r = 0; r < g.values.size(); ++r) {
    hits += g.values[r] <= o.threshold;
    rep.add(detail::fmt("d=%d k=%d N=%ld rep %zu: ||W - I|| = %.6g", o.d, o.k, static_cast<long>(o.N), r,
                        g.values[r]));
  }
  const bool count_ok = hits >= o.min_pass;
  rep.add(detail::fmt("%d of %d reps <= %.3g (need %d): %s", hits, o.reps, o.threshold, o.min_pass,
                      count_ok ? "pass" : "FAIL"));
  bool mono = true;
  double prev = std::numeric_limits<double>::infinity();
  for (int d : o.dims) {
    const double med = gram_diagnostic(d, o.k, o.N, o.reps, o.seed).median();
    rep.add(detail::fmt("d=%d: median ||W - I|| = %.6g", d, med));
    mono = mono && med < prev;
    prev = med;
  }
  rep.add(std::string("median decreasing in d: ") + (mono ? "pass" : "FAIL"));
  rep.passed = count_ok && mono;
  return rep;
}

inline const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names{"rf_decomposition", "krr_plateau", "interpolator_bound",
                                              "gram_concentration"};
  return names;
}

}  // namespace rfnt
