#pragma once

#include <sstream>
#include <string>

#include <json.hpp>

#include "selfnorm/confset.hpp"
#include "selfnorm/csv.hpp"
#include "selfnorm/simharness.hpp"

namespace selfnorm {

using Json = nlohmann::json;

inline Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw Error("json matrix: expected a non-empty array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = j.at(0).size();
  Matrix m(rows, cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    if (j.at(i).size() != cols) throw Error("json matrix: ragged rows");
    for (std::size_t k = 0; k < cols; ++k) m(i, k) = j.at(i).at(k).get<double>();
  }
  return m;
}

// ---------------------------------------------------------------------------
// Calibrated sets
// ---------------------------------------------------------------------------

inline Json set_to_json(const CalibratedSet& set) {
  Json j;
  j["format"] = "selfnorm-set-v1";
  j["variant"] = variant_name(set.variant);
  j["alpha"] = set.alpha;
  j["khat"] = {{"value", set.khat.khat},
               {"method", method_name(set.khat.method)},
               {"B", set.khat.b_used},
               {"seed", set.khat.seed_used}};
  j["pilot_beta"] = set.pilot_beta;
  if (set.variant == SetVariant::lin || set.variant == SetVariant::reclin) {
    j["analysis_center"] = set.analysis_center;
    Json analysis;
    analysis["x"] = matrix_to_json(set.analysis->x);
    analysis["y"] = set.analysis->y;
    j["analysis"] = std::move(analysis);
  }
  if (set.rotation) j["rotation"] = matrix_to_json(*set.rotation);
  if (set.wald_center) j["wald_center"] = *set.wald_center;
  if (set.wald_halfwidths) j["wald_halfwidths"] = *set.wald_halfwidths;
  return j;
}

inline CalibratedSet set_from_json(const Json& j) {
  if (j.value("format", "") != "selfnorm-set-v1") {
    throw Error("set json: unknown or missing format tag");
  }
  CalibratedSet set;
  set.variant = variant_from_name(j.at("variant").get<std::string>());
  set.alpha = j.at("alpha").get<double>();
  const Json& k = j.at("khat");
  set.khat.khat = k.at("value").get<double>();
  const std::string mname = k.at("method").get<std::string>();
  set.khat.method = mname == "bonferroni"  ? QuantileMethod::bonferroni
                    : mname == "sidak"     ? QuantileMethod::sidak
                                           : QuantileMethod::bootstrap;
  set.khat.b_used = k.at("B").get<std::uint64_t>();
  set.khat.seed_used = k.at("seed").get<std::uint64_t>();
  set.pilot_beta = j.at("pilot_beta").get<Vector>();
  if (set.variant == SetVariant::lin || set.variant == SetVariant::reclin) {
    set.analysis_center = j.at("analysis_center").get<Vector>();
    const Json& a = j.at("analysis");
    set.analysis.emplace(matrix_from_json(a.at("x")), a.at("y").get<Vector>());
  }
  if (j.contains("rotation")) set.rotation = matrix_from_json(j.at("rotation"));
  if (j.contains("wald_center")) set.wald_center = j.at("wald_center").get<Vector>();
  if (j.contains("wald_halfwidths")) set.wald_halfwidths = j.at("wald_halfwidths").get<Vector>();
  finalize_rotation(set);
  return set;
}

// ---------------------------------------------------------------------------
// DGP specs
// ---------------------------------------------------------------------------

inline Json dgp_to_json(const DgpSpec& spec) {
  Json j;
  j["n_total"] = spec.n_total;
  j["p"] = spec.p;
  j["design"] = spec.design == DesignKind::gaussian ? "gaussian" : "student";
  if (spec.design == DesignKind::student) j["df"] = spec.student_df;
  Json noise;
  if (spec.noise == NoiseKind::homoskedastic) {
    noise["kind"] = "homoskedastic";
    noise["sigma"] = spec.sigma;
  } else {
    noise["kind"] = "heteroskedastic";
    noise["gamma"] = spec.gamma;
  }
  j["noise"] = std::move(noise);
  Json misspec;
  if (spec.misspec == MisspecKind::none) {
    misspec["kind"] = "none";
  } else {
    misspec["kind"] = "quadratic";
    misspec["index"] = spec.quad_index + 1;  // 1-based in configs
  }
  j["misspec"] = std::move(misspec);
  j["beta0"] = spec.beta0;
  j["seed"] = spec.seed;
  return j;
}

inline DgpSpec dgp_from_json(const Json& j) {
  DgpSpec spec;
  spec.n_total = j.at("n_total").get<std::size_t>();
  spec.p = j.at("p").get<std::size_t>();
  const std::string design = j.value("design", "gaussian");
  if (design == "gaussian") {
    spec.design = DesignKind::gaussian;
  } else if (design == "student") {
    spec.design = DesignKind::student;
    spec.student_df = j.at("df").get<unsigned>();
  } else {
    throw InvalidSpec("dgp json: unknown design '" + design + "'");
  }
  if (j.contains("noise")) {
    const Json& noise = j.at("noise");
    const std::string kind = noise.at("kind").get<std::string>();
    if (kind == "homoskedastic") {
      spec.noise = NoiseKind::homoskedastic;
      spec.sigma = noise.value("sigma", 1.0);
    } else if (kind == "heteroskedastic") {
      spec.noise = NoiseKind::heteroskedastic;
      spec.gamma = noise.at("gamma").get<Vector>();
    } else {
      throw InvalidSpec("dgp json: unknown noise kind '" + kind + "'");
    }
  }
  if (j.contains("misspec")) {
    const Json& mis = j.at("misspec");
    const std::string kind = mis.at("kind").get<std::string>();
    if (kind == "none") {
      spec.misspec = MisspecKind::none;
    } else if (kind == "quadratic") {
      spec.misspec = MisspecKind::quadratic;
      const auto idx = mis.at("index").get<std::size_t>();
      if (idx < 1) throw InvalidSpec("dgp json: quadratic index is 1-based");
      spec.quad_index = idx - 1;
    } else {
      throw InvalidSpec("dgp json: unknown misspec kind '" + kind + "'");
    }
  }
  const Json& beta0 = j.at("beta0");
  if (beta0.is_number()) {
    spec.beta0.assign(spec.p, beta0.get<double>());
  } else {
    spec.beta0 = beta0.get<Vector>();
  }
  spec.seed = j.value("seed", std::uint64_t{0});
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Report serialization: per-replication CSV plus a JSON summary that echoes
// the fully resolved configuration. runtime_s is the only field excluded
// from the byte-identical reproducibility contract.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string csv_value(double v) {
  if (std::isnan(v)) return "";
  return format_double(v);
}

inline Json probe_to_json(const ProbeOptions& probe) {
  return Json{{"random_directions", probe.random_directions},
              {"tol", probe.tol},
              {"t_max", probe.t_max}};
}

}  // namespace detail

inline std::string coverage_csv(const CoverageReport& report) {
  std::ostringstream os;
  os << "rep,seed,hit,khat,diam2,failed,error\n";
  for (const auto& out : report.outcomes) {
    os << out.rep << "," << out.seed << "," << (out.failed ? "" : (out.hit ? "1" : "0")) << ","
       << detail::csv_value(out.khat) << "," << detail::csv_value(out.diam2) << ","
       << (out.failed ? "1" : "0") << "," << out.error << "\n";
  }
  return os.str();
}

inline Json coverage_summary(const CoverageReport& report) {
  Json config;
  config["dgp"] = dgp_to_json(report.spec);
  config["method"] = coverage_method_name(report.method);
  config["alpha"] = report.options.alpha;
  config["B"] = report.b_resolved;
  config["reps"] = report.options.reps;
  config["seed"] = report.options.base_seed;
  config["threads"] = report.options.threads;
  config["geometry"] = report.options.geometry;
  if (report.options.geometry) config["probe"] = detail::probe_to_json(report.options.probe);

  Json j;
  j["config"] = std::move(config);
  j["reps"] = report.reps;
  j["hits"] = report.hits;
  j["misses"] = report.misses;
  j["failures"] = report.failures;
  j["coverage"] = report.coverage;
  j["mc_se"] = report.mc_se;
  j["mean_khat"] = report.mean_khat;
  if (std::isfinite(report.median_diam2)) j["median_diam2"] = report.median_diam2;
  j["runtime_s"] = report.runtime_s;
  return j;
}

inline std::string width_csv(const WidthReport& report) {
  std::ostringstream os;
  os << "n,rep,seed,diam2,khat,failed,error\n";
  for (const auto& cell : report.cells) {
    const auto& out = cell.outcome;
    os << cell.n << "," << out.rep << "," << out.seed << "," << detail::csv_value(out.diam2)
       << "," << detail::csv_value(out.khat) << "," << (out.failed ? "1" : "0") << ","
       << out.error << "\n";
  }
  return os.str();
}

inline Json width_summary(const WidthReport& report) {
  Json config;
  config["dgp"] = dgp_to_json(report.spec);
  config["method"] = coverage_method_name(report.method);
  config["alpha"] = report.options.alpha;
  config["B"] = report.options.b_draws;
  config["reps"] = report.options.reps;
  config["seed"] = report.options.base_seed;
  config["threads"] = report.options.threads;
  config["n_grid"] = report.n_grid;
  config["probe"] = detail::probe_to_json(report.options.probe);

  Json rows = Json::array();
  for (const auto& row : report.rows) {
    Json r;
    r["n"] = row.n;
    r["reps"] = row.reps;
    r["failures"] = row.failures;
    r["median_diam2"] = row.median_diam2;
    r["median_khat"] = row.median_khat;
    if (std::isfinite(row.ratio_vs_prev)) r["ratio_vs_prev"] = row.ratio_vs_prev;
    rows.push_back(std::move(r));
  }
  Json j;
  j["config"] = std::move(config);
  j["rows"] = std::move(rows);
  j["runtime_s"] = report.runtime_s;
  return j;
}

inline std::string concentration_csv(const ConcentrationReport& report) {
  std::ostringstream os;
  os << "n,rep,seed,deviation,failed,error\n";
  for (const auto& cell : report.cells) {
    os << cell.n << "," << cell.rep << "," << cell.seed << ","
       << detail::csv_value(cell.deviation) << "," << (cell.failed ? "1" : "0") << ","
       << cell.error << "\n";
  }
  return os.str();
}

inline Json concentration_summary(const ConcentrationReport& report) {
  Json config;
  config["dgp"] = dgp_to_json(report.spec);
  config["reps"] = report.options.reps;
  config["seed"] = report.options.base_seed;
  config["threads"] = report.options.threads;
  config["n_grid"] = report.n_grid;
  config["oracle_rows"] = report.oracle_rows;

  Json rows = Json::array();
  for (const auto& row : report.rows) {
    rows.push_back(Json{{"n", row.n},
                        {"reps", row.reps},
                        {"failures", row.failures},
                        {"median_deviation", row.median_deviation}});
  }
  Json j;
  j["config"] = std::move(config);
  j["rows"] = std::move(rows);
  j["runtime_s"] = report.runtime_s;
  return j;
}

inline std::string hausdorff_csv(const HausdorffReport& report) {
  std::ostringstream os;
  os << "n,rep,seed,d2,diam2_waldo,khat,failed,error\n";
  for (const auto& cell : report.cells) {
    const auto& out = cell.outcome;
    os << cell.n << "," << out.rep << "," << out.seed << "," << detail::csv_value(out.diam2)
       << "," << detail::csv_value(cell.diam2_waldo) << "," << detail::csv_value(out.khat) << ","
       << (out.failed ? "1" : "0") << "," << out.error << "\n";
  }
  return os.str();
}

inline Json hausdorff_summary(const HausdorffReport& report) {
  Json config;
  config["dgp"] = dgp_to_json(report.spec);
  config["alpha"] = report.options.alpha;
  config["B"] = report.options.b_draws;
  config["reps"] = report.options.reps;
  config["seed"] = report.options.base_seed;
  config["threads"] = report.options.threads;
  config["n_grid"] = report.n_grid;
  config["probe"] = detail::probe_to_json(report.options.probe);

  Json rows = Json::array();
  for (const auto& row : report.rows) {
    rows.push_back(Json{{"n", row.n},
                        {"reps", row.reps},
                        {"failures", row.failures},
                        {"median_d2", row.median_d2},
                        {"median_diam2_waldo", row.median_diam2_waldo},
                        {"ratio", row.ratio}});
  }
  Json j;
  j["config"] = std::move(config);
  j["rows"] = std::move(rows);
  j["runtime_s"] = report.runtime_s;
  return j;
}

}  // namespace selfnorm
