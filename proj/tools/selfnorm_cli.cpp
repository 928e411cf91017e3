// Command-line front end: calibrate confidence sets from CSV datasets, query
// membership, compute calibration quantiles, and drive the Monte Carlo
// simulation and diagnostic runners.
//
// Exit codes: 0 success (member), 1 non-member, 2 configuration error,
// 3 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "selfnorm/serialize.hpp"

namespace {

using namespace selfnorm;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write file: " + path.string());
  out << content;
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string vector_preview(const Vector& v, std::size_t limit = 8) {
  std::string out = "[";
  for (std::size_t j = 0; j < v.size() && j < limit; ++j) {
    if (j) out += ", ";
    out += format_number(v[j]);
  }
  if (v.size() > limit) out += ", ...";
  out += "]";
  return out;
}

ProbeOptions probe_from_json(const Json& config) {
  ProbeOptions probe;
  if (config.contains("probe")) {
    const Json& p = config.at("probe");
    probe.random_directions = p.value("random_directions", probe.random_directions);
    probe.tol = p.value("tol", probe.tol);
    probe.t_max = p.value("t_max", probe.t_max);
  }
  return probe;
}

struct CommonArgs {
  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed_override;
  bool verbose = false;
};

int cmd_calibrate(const CommonArgs& args) {
  Json config;
  std::string variant;
  double alpha = 0.0;
  std::uint64_t b_draws = 0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string dataset_path;
  try {
    config = load_json_file(args.config_path);
    dataset_path = config.at("dataset").get<std::string>();
    variant = config.value("variant", "lin");
    alpha = config.at("alpha").get<double>();
    b_draws = config.value("B", std::uint64_t{0});
    seed = config.value("seed", std::uint64_t{0});
    threads = resolve_threads(config.value("threads", 0u));
    variant_from_name(variant);
  } catch (const Json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  if (args.seed_override) seed = *args.seed_override;

  CalibratedSet set;
  std::size_t n = 0, p = 0;
  try {
    RegressionSample sample = [&] {
      try {
        return load_regression_csv(dataset_path);
      } catch (const std::exception& e) {
        throw ConfigError(std::string("dataset: ") + e.what());
      }
    }();
    n = sample.n();
    p = sample.dim();
    const SetVariant v = variant_from_name(variant);
    if (v == SetVariant::lin) {
      set = calibrate_lin(sample, alpha, b_draws, seed, threads);
    } else if (v == SetVariant::reclin) {
      set = calibrate_reclin(sample, alpha, b_draws, seed, threads);
    } else {
      double k_n = config.value("k", 0.0);
      if (k_n <= 0.0) k_n = sidak_quantile(alpha, sample.dim()).khat;
      std::optional<WaldOracleInputs> oracle;
      if (v == SetVariant::wald_oracle) {
        WaldOracleInputs inputs{load_matrix_csv(config.at("sigma_csv").get<std::string>()),
                                load_matrix_csv(config.at("vstar_csv").get<std::string>())};
        oracle = std::move(inputs);
      }
      set = calibrate_wald(sample, k_n, oracle);
      set.alpha = alpha;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "calibration failed: " << e.what() << "\n";
    return 3;
  }

  write_text_file(args.out_path, set_to_json(set).dump(2) + "\n");
  std::cout << "variant: " << variant_name(set.variant) << "\n";
  std::cout << "khat: " << format_number(set.khat.khat) << "\n";
  std::cout << "pilot_beta: " << vector_preview(set.pilot_beta) << "\n";
  if (args.verbose) {
    std::cout << "n: " << n << "\np: " << p << "\nB: " << set.khat.b_used << "\nseed: " << seed
              << "\nout: " << args.out_path << "\n";
  }
  return 0;
}

int cmd_member(const std::string& set_path, const std::string& beta_path) {
  CalibratedSet set;
  Vector beta;
  try {
    set = set_from_json(load_json_file(set_path));
    beta = load_vector_csv(beta_path);
    if (beta.size() != set.dim()) {
      throw ConfigError("beta has length " + std::to_string(beta.size()) + ", set expects " +
                        std::to_string(set.dim()));
    }
  } catch (const Json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  try {
    const auto [stat, threshold] = membership_statistic(set, beta);
    const bool inside = member(set, beta);
    std::cout << "member: " << (inside ? "true" : "false") << "\n";
    std::cout << "statistic: " << format_number(stat) << "\n";
    std::cout << "threshold: " << format_number(threshold) << "\n";
    return inside ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "membership evaluation failed: " << e.what() << "\n";
    return 3;
  }
}

int cmd_quantile(const std::string& method, double alpha, std::size_t p,
                 const std::string& gamma_path, const std::string& set_path, std::uint64_t b_draws,
                 std::uint64_t seed, unsigned threads) {
  try {
    QuantileValue value;
    std::size_t p_used = p;
    if (method == "bonferroni" || method == "sidak") {
      if (p_used == 0) throw ConfigError("--p is required for " + method);
      value = method == "bonferroni" ? bonferroni_quantile(alpha, p_used)
                                     : sidak_quantile(alpha, p_used);
    } else {
      std::optional<CorrelationMatrix> gamma;
      if (!gamma_path.empty()) {
        gamma.emplace(load_matrix_csv(gamma_path));
      } else if (!set_path.empty()) {
        const CalibratedSet set = set_from_json(load_json_file(set_path));
        if (!set.analysis) {
          throw ConfigError("set json does not carry an analysis sample");
        }
        const PsiMatrix psi = linreg_psi(*set.analysis, set.pilot_beta);
        gamma.emplace(set.rotation ? rotated_plugin_correlation(psi, *set.rotation)
                                   : plugin_correlation(psi));
      } else {
        throw ConfigError("bootstrap needs --gamma or --set");
      }
      if (p_used != 0 && p_used != gamma->dim()) {
        throw ConfigError("--p disagrees with the correlation matrix dimension");
      }
      p_used = gamma->dim();
      if (b_draws == 0) b_draws = 200000;
      value = bootstrap_quantile(*gamma, alpha, b_draws, seed, resolve_threads(threads));
    }
    std::cout << "method: " << method << "\n";
    std::cout << "alpha: " << format_number(alpha) << "\n";
    std::cout << "p: " << p_used << "\n";
    if (method == "bootstrap") {
      std::cout << "B: " << value.b_used << "\n";
      std::cout << "seed: " << value.seed_used << "\n";
    }
    std::cout << "K: " << format_number(value.khat) << "\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const OutOfRange& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "quantile computation failed: " << e.what() << "\n";
    return 3;
  }
}

int cmd_simulate(const CommonArgs& args) {
  DgpSpec spec;
  CoverageMethod method = CoverageMethod::lin;
  CoverageOptions opt;
  try {
    const Json config = load_json_file(args.config_path);
    spec = dgp_from_json(config.at("dgp"));
    method = coverage_method_from_name(config.value("method", "lin"));
    opt.alpha = config.at("alpha").get<double>();
    opt.b_draws = config.value("B", std::uint64_t{0});
    opt.reps = config.at("reps").get<std::size_t>();
    opt.base_seed = config.value("seed", std::uint64_t{1});
    opt.threads = resolve_threads(config.value("threads", 0u));
    opt.geometry = config.value("geometry", false);
    opt.probe = probe_from_json(config);
  } catch (const Json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  if (args.seed_override) opt.base_seed = *args.seed_override;

  try {
    OracleCache cache = OracleCache::from_environment();
    const CoverageReport report = run_coverage(spec, method, opt, &cache);
    const std::filesystem::path out_dir(args.out_path);
    write_text_file(out_dir / "replications.csv", coverage_csv(report));
    Json summary = coverage_summary(report);
    summary["kind"] = "coverage";
    write_text_file(out_dir / "summary.json", summary.dump(2) + "\n");
    std::cout << "method: " << coverage_method_name(method) << "\n";
    std::cout << "coverage: " << format_number(report.coverage) << " (mc_se "
              << format_number(report.mc_se) << ")\n";
    std::cout << "hits/misses/failures: " << report.hits << "/" << report.misses << "/"
              << report.failures << "\n";
    std::cout << "out: " << (out_dir / "summary.json").string() << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "simulation failed: " << e.what() << "\n";
    return 3;
  }
}

int cmd_diag(const std::string& kind, const CommonArgs& args) {
  DgpSpec spec;
  GridOptions opt;
  std::vector<std::size_t> n_grid;
  CoverageMethod method = CoverageMethod::reclin;
  std::size_t oracle_rows = kOracleRows;
  try {
    const Json config = load_json_file(args.config_path);
    Json dgp = config.at("dgp");
    n_grid = config.at("n_grid").get<std::vector<std::size_t>>();
    if (n_grid.empty()) throw ConfigError("n_grid must be non-empty");
    if (!dgp.contains("n_total")) dgp["n_total"] = n_grid.front();
    spec = dgp_from_json(dgp);
    opt.alpha = config.value("alpha", 0.1);
    opt.b_draws = config.value("B", std::uint64_t{0});
    opt.reps = config.at("reps").get<std::size_t>();
    opt.base_seed = config.value("seed", std::uint64_t{1});
    opt.threads = resolve_threads(config.value("threads", 0u));
    opt.probe = probe_from_json(config);
    method = coverage_method_from_name(config.value("method", "reclin"));
    oracle_rows = config.value("oracle_rows", kOracleRows);
  } catch (const Json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  if (args.seed_override) opt.base_seed = *args.seed_override;

  try {
    OracleCache cache = OracleCache::from_environment();
    const std::filesystem::path out_dir(args.out_path);
    Json summary;
    std::string csv;
    if (kind == "width") {
      const WidthReport report = run_width_scaling(spec, n_grid, method, opt);
      csv = width_csv(report);
      summary = width_summary(report);
      for (const auto& row : report.rows) {
        std::cout << "n=" << row.n << " median_diam2=" << format_number(row.median_diam2);
        if (std::isfinite(row.ratio_vs_prev)) {
          std::cout << " ratio_vs_prev=" << format_number(row.ratio_vs_prev);
        }
        std::cout << "\n";
      }
    } else if (kind == "concentration") {
      const ConcentrationReport report = run_concentration(spec, n_grid, opt, &cache, oracle_rows);
      csv = concentration_csv(report);
      summary = concentration_summary(report);
      for (const auto& row : report.rows) {
        std::cout << "n=" << row.n
                  << " median_deviation=" << format_number(row.median_deviation) << "\n";
      }
    } else {
      const HausdorffReport report = run_hausdorff_similarity(spec, n_grid, opt, &cache);
      csv = hausdorff_csv(report);
      summary = hausdorff_summary(report);
      for (const auto& row : report.rows) {
        std::cout << "n=" << row.n << " median_d2=" << format_number(row.median_d2)
                  << " ratio=" << format_number(row.ratio) << "\n";
      }
    }
    summary["kind"] = kind;
    write_text_file(out_dir / "replications.csv", csv);
    write_text_file(out_dir / "summary.json", summary.dump(2) + "\n");
    std::cout << "out: " << (out_dir / "summary.json").string() << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "diagnostic failed: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-normalized confidence sets for Z-estimators"};
  app.require_subcommand(1);
  int rc = 0;

  CommonArgs calibrate_args;
  auto* calibrate = app.add_subcommand("calibrate", "Calibrate a confidence set from a dataset");
  calibrate->add_option("--config", calibrate_args.config_path, "JSON config")->required();
  calibrate->add_option("--out", calibrate_args.out_path, "output set JSON")->required();
  calibrate->add_option("--seed", calibrate_args.seed_override, "seed override");
  calibrate->add_flag("--verbose", calibrate_args.verbose, "verbose output");
  calibrate->callback([&] { rc = cmd_calibrate(calibrate_args); });

  std::string member_set, member_beta;
  auto* member_cmd = app.add_subcommand("member", "Test membership of a candidate beta");
  member_cmd->add_option("--set", member_set, "calibrated set JSON")->required();
  member_cmd->add_option("--beta", member_beta, "candidate beta CSV")->required();
  member_cmd->callback([&] { rc = cmd_member(member_set, member_beta); });

  std::string q_method, q_gamma, q_set;
  double q_alpha = 0.05;
  std::size_t q_p = 0;
  std::uint64_t q_b = 0, q_seed = 0;
  unsigned q_threads = 0;
  auto* quantile = app.add_subcommand("quantile", "Compute a calibration quantile");
  quantile->add_option("--method", q_method, "bonferroni|sidak|bootstrap")
      ->required()
      ->check(CLI::IsMember({"bonferroni", "sidak", "bootstrap"}));
  quantile->add_option("--alpha", q_alpha, "miscoverage level")->required();
  quantile->add_option("--p", q_p, "dimension");
  quantile->add_option("--gamma", q_gamma, "correlation matrix CSV (bootstrap)");
  quantile->add_option("--set", q_set, "calibrated set JSON (bootstrap)");
  quantile->add_option("--B", q_b, "bootstrap draws");
  quantile->add_option("--seed", q_seed, "bootstrap seed");
  quantile->add_option("--threads", q_threads, "worker threads");
  quantile->callback(
      [&] { rc = cmd_quantile(q_method, q_alpha, q_p, q_gamma, q_set, q_b, q_seed, q_threads); });

  CommonArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo coverage experiment");
  simulate->add_option("--config", sim_args.config_path, "JSON config")->required();
  simulate->add_option("--out", sim_args.out_path, "output directory")->required();
  simulate->add_option("--seed", sim_args.seed_override, "seed override");
  simulate->callback([&] { rc = cmd_simulate(sim_args); });

  std::string diag_kind;
  CommonArgs diag_args;
  auto* diag = app.add_subcommand("diag", "Scaling diagnostics over an n grid");
  diag->add_option("--kind", diag_kind, "width|concentration|hausdorff")
      ->required()
      ->check(CLI::IsMember({"width", "concentration", "hausdorff"}));
  diag->add_option("--config", diag_args.config_path, "JSON config")->required();
  diag->add_option("--out", diag_args.out_path, "output directory")->required();
  diag->add_option("--seed", diag_args.seed_override, "seed override");
  diag->callback([&] { rc = cmd_diag(diag_kind, diag_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return rc;
}
