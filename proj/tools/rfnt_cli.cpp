// rfnt: sweeps, staircase, spectrum and Gram dumps, and risk checks.
// Exit codes: 0 ok, 1 check failed, 2 configuration or usage error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rfnt/experiment.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  long long seed = -1;
  int threads = 1;
  bool verbose = false;
  bool timing = false;
};

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw rfnt::ConfigError("cannot write '" + path + "'");
  f << text;
}

rfnt::ExperimentConfig configure(const Common& o) {
  if (o.config.empty()) throw rfnt::ConfigError("--config is required");
  auto c = rfnt::load_config(o.config);
  if (o.seed >= 0) c.seed = static_cast<std::uint64_t>(o.seed);
  if (!o.out.empty()) c.output = o.out;
  if (o.threads < 1) throw rfnt::ConfigError("--threads must be >= 1");
  return c;
}

int simulate(const Common& o) {
  const auto c = configure(o);
  const auto recs = rfnt::run_sweep(c, o.threads, [&](std::size_t i, const rfnt::RunRecord& r) {
    if (!o.verbose) return;
    std::cerr << "[" << i << "] " << r.model << " N=" << r.N << " n=" << r.n << " lambda=" << r.lambda
              << " seed=" << r.seed;
    if (r.error.empty()) {
      std::cerr << " normalized_risk=" << r.normalized_risk << " (" << r.elapsed_s << " s)\n";
    } else {
      std::cerr << " error: " << r.error << "\n";
    }
  });
  std::ostringstream os;
  rfnt::write_run_csv(os, recs, o.timing);
  emit(c.output, os.str());
  std::size_t failed = 0;
  for (const auto& r : recs) failed += !r.error.empty();
  if (failed) {
    std::ostringstream es;
    rfnt::write_errors_csv(es, recs);
    if (c.output.empty() || c.output == "-") {
      std::cerr << es.str();
    } else {
      emit(c.output + ".errors.csv", es.str());
    }
    std::cerr << failed << " of " << recs.size() << " tasks failed\n";
  }
  return 0;
}

int staircase(const Common& o) {
  const auto c = configure(o);
  const auto recs = rfnt::staircase(c, o.threads);
  std::ostringstream os;
  rfnt::write_staircase_csv(os, recs);
  emit(c.output, os.str());
  for (const auto& r : recs)
    if (!r.error.empty()) std::cerr << "N=" << r.N << " seed=" << r.seed << " error: " << r.error << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-features, neural-tangent and kernel ridge regression experiments on the sphere"};
  app.require_subcommand(1);

  Common common;
  const auto add_common = [&](CLI::App* s, bool with_config) {
    if (with_config) s->add_option("--config", common.config, "key = value configuration file")->required();
    s->add_option("--out", common.out, "output file (default: config 'output' or stdout)");
    s->add_option("--seed", common.seed, "master seed (overrides config)");
    s->add_option("--threads", common.threads, "worker threads")->check(CLI::PositiveNumber);
    s->add_flag("--verbose", common.verbose, "progress on stderr");
  };

  auto* sim = app.add_subcommand("simulate", "run a sweep and write one CSV row per task");
  add_common(sim, true);
  sim->add_flag("--timing", common.timing, "write measured elapsed_s (breaks byte-identical output)");

  auto* stair = app.add_subcommand("staircase", "approximation risk against log(parameters) / log d");
  add_common(stair, true);

  auto* spec = app.add_subcommand("spectrum", "kernel eigenvalues xi_k and multiplicities B(d,k)");
  add_common(spec, false);
  std::string activation = "shifted_relu", kernel = "rf";
  double u0 = 0.5;
  std::vector<int> dims{30};
  int K = 10;
  spec->add_option("--activation", activation, "shifted_relu | relu | step | identity");
  spec->add_option("--u0", u0, "activation shift");
  spec->add_option("--kernel", kernel, "rf | nt")->check(CLI::IsMember({"rf", "nt"}));
  spec->add_option("--d", dims, "dimensions")->expected(1, -1);
  spec->add_option("--K", K, "largest degree")->check(CLI::NonNegativeNumber);

  auto* gram = app.add_subcommand("gram", "operator-norm deviation of Gegenbauer Gram matrices");
  add_common(gram, false);
  std::vector<int> gdims{50, 100, 200}, degrees{2};
  long long gN = 100;
  int reps = 5;
  gram->add_option("--d", gdims, "dimensions")->expected(1, -1);
  gram->add_option("--k", degrees, "degrees")->expected(1, -1);
  gram->add_option("--N", gN, "points")->check(CLI::PositiveNumber);
  gram->add_option("--reps", reps, "repetitions")->check(CLI::PositiveNumber);

  auto* plat = app.add_subcommand("plateau", "reference levels ||P_{>l} f||^2 / ||f||^2");
  add_common(plat, false);
  std::vector<std::string> ptargets{"quad_split", "cubic_hermite"};
  std::vector<int> pdims{20, 30}, ells{0, 1, 2, 3};
  plat->add_option("--target", ptargets, "targets")->expected(1, -1);
  plat->add_option("--d", pdims, "dimensions")->expected(1, -1);
  plat->add_option("--ell", ells, "degrees")->expected(1, -1);

  auto* check = app.add_subcommand("theorem-check", "run a packaged check; exit 1 on threshold violation");
  add_common(check, false);
  std::string name;
  std::vector<double> factors;
  check->add_option("name", name, "rf_decomposition | krr_plateau | interpolator_bound | gram_concentration")
      ->required()
      ->check(CLI::IsMember(rfnt::check_names()));
  check->add_option("--lambda-factors", factors, "lambda / lambda_* values for the kernel checks")->expected(1, -1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) return simulate(common);
    if (*stair) return staircase(common);
    if (*spec) {
      for (int d : dims)
        if (d < 2) throw rfnt::ConfigError("--d must be >= 2");
      std::ostringstream os;
      rfnt::write_spectrum_csv(os, rfnt::activation_by_name(activation, u0), kernel, dims, K);
      emit(common.out, os.str());
      return 0;
    }
    if (*gram) {
      std::vector<rfnt::GramDiagnostic> gs;
      const std::uint64_t seed = common.seed >= 0 ? static_cast<std::uint64_t>(common.seed) : 0;
      for (int d : gdims)
        for (int k : degrees) gs.push_back(rfnt::gram_diagnostic(d, k, gN, reps, rfnt::derive_seed(seed, d * 1000 + k)));
      std::ostringstream os;
      rfnt::write_gram_csv(os, gs);
      emit(common.out, os.str());
      return 0;
    }
    if (*plat) {
      std::ostringstream os;
      rfnt::write_plateau_csv(os, ptargets, pdims, ells);
      emit(common.out, os.str());
      return 0;
    }
    if (*check) {
      rfnt::CheckReport rep;
      if (name == "rf_decomposition") {
        rfnt::DecompositionOptions o;
        if (common.seed >= 0) o.seed = common.seed;
        rep = rfnt::check_rf_decomposition(o);
      } else if (name == "gram_concentration") {
        rfnt::GramCheckOptions o;
        if (common.seed >= 0) o.seed = common.seed;
        rep = rfnt::check_gram_concentration(o);
      } else {
        rfnt::KrrCheckOptions o;
        if (common.seed >= 0) o.seed = common.seed;
        if (!factors.empty()) o.plateau_factors = o.bound_factors = factors;
        rep = name == "krr_plateau" ? rfnt::check_krr_plateau(o) : rfnt::check_interpolator_bound(o);
      }
      std::ostringstream os;
      for (const auto& l : rep.lines) os << l << "\n";
      os << rep.name << ": " << (rep.passed ? "PASS" : "FAIL") << "\n";
      emit(common.out, os.str());
      return rep.passed ? 0 : 1;
    }
  } catch (const rfnt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
