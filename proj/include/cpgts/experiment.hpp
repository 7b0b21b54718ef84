#pragma once

/// \file experiment.hpp
/// \brief Experiment configuration, runners for the three modes, and result output.
///
/// Config schema (JSON):
///
///   {
///     "problem":  {"name": "vdp", "params": {"mu": 10}},
///     "scheme":   "trapezoid" | "simpson" | "lobatto:m" | "radau:m" | "gauss:m",
///     "mode":     "adaptive" | "uniform" | "classical_radau",
///     "initial_intervals": 10,
///     "adaptive": {"theta": 0.5, "marking": "raw", "max_iterations": 12,
///                  "target_eta": 1e-6, "max_intervals": 100000,
///                  "refine_on_newton_failure": false},
///     "uniform":  {"levels": 6},
///     "classical": {"tolerances": [1e-4, 1e-6], "stages": 3},
///     "reference": {"kind": "auto" | "analytic" | "refined" | "radau" | "none",
///                   "levels": 2, "tolerance": 1e-12, "stages": 5},
///     "linf_step": 0.1,
///     "newton":   {"max_iter": 25, "abs_tol": 1e-12, "rel_tol": 1e-10,
///                  "damping": false, "retry_with_damping": true},
///     "output":   {"csv": "out.csv", "jsonl": "out.jsonl"},
///     "seed": 0
///   }
///
/// Every field except "problem" has a default.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "adaptive.hpp"
#include "classical_radau.hpp"
#include "cpg_solver.hpp"
#include "error_metrics.hpp"
#include "estimators.hpp"
#include "problems.hpp"
#include "quadrature.hpp"
#include "time_mesh.hpp"

namespace cpgts {

enum class Mode { Adaptive, Uniform, ClassicalRadau };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::Adaptive: return "adaptive";
    case Mode::Uniform: return "uniform";
    case Mode::ClassicalRadau: return "classical_radau";
  }
  return "?";
}

inline Mode mode_from_string(const std::string& s) {
  if (s == "adaptive") return Mode::Adaptive;
  if (s == "uniform") return Mode::Uniform;
  if (s == "classical_radau") return Mode::ClassicalRadau;
  throw std::invalid_argument("unknown mode '" + s + "'");
}

/// "trapezoid", "simpson", "lobatto:m", "radau:m", "gauss:m".
inline QuadRule parse_scheme(const std::string& spec) {
  if (spec == "trapezoid") return build_rule(QuadFamily::Lobatto, 2);
  if (spec == "simpson") return build_rule(QuadFamily::Lobatto, 3);
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("unknown scheme '" + spec + "'");
  const std::string fam = spec.substr(0, colon);
  int m = 0;
  try {
    std::size_t used = 0;
    m = std::stoi(spec.substr(colon + 1), &used);
    if (used != spec.size() - colon - 1) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw std::invalid_argument("scheme '" + spec + "': m must be an integer");
  }
  if (fam == "lobatto") return build_rule(QuadFamily::Lobatto, m);
  if (fam == "radau") return build_rule(QuadFamily::RadauRight, m);
  if (fam == "gauss") return build_rule(QuadFamily::GaussLegendre, m);
  throw std::invalid_argument("unknown scheme family '" + fam + "'");
}

enum class ReferenceKind { Auto, Analytic, Refined, Radau, None };

struct ReferenceSpec {
  ReferenceKind kind = ReferenceKind::Auto;
  unsigned levels = 2;       // refined: extra uniform levels on the finest mesh
  double tolerance = 1e-12;  // radau: controller tolerance
  int stages = 5;            // radau: stage count
};

struct ExperimentConfig {
  std::string problem_name;
  nlohmann::json problem_params = nlohmann::json::object();
  std::string scheme = "trapezoid";
  Mode mode = Mode::Adaptive;
  std::size_t initial_intervals = 10;
  AdaptiveConfig adaptive;
  unsigned uniform_levels = 6;
  std::vector<double> classical_tolerances{1e-3, 1e-4, 1e-5, 1e-6};
  int classical_stages = 3;
  ReferenceSpec reference;
  std::optional<double> linf_step = 0.1;
  std::string csv_path, jsonl_path;
  std::uint64_t seed = 0;

  void validate() const {
    if (problem_name.empty()) throw std::invalid_argument("config: problem name missing");
    (void)parse_scheme(scheme);
    if (initial_intervals < 1) throw std::invalid_argument("config: initial_intervals must be >= 1");
    if (mode == Mode::Adaptive) adaptive.validate();
    if (mode == Mode::Uniform && uniform_levels < 1) throw std::invalid_argument("config: uniform.levels must be >= 1");
    if (mode == Mode::ClassicalRadau) {
      if (classical_tolerances.empty()) throw std::invalid_argument("config: classical.tolerances is empty");
      for (double t : classical_tolerances)
        if (!(t > 0.0)) throw std::invalid_argument("config: classical tolerances must be positive");
      if (classical_stages < 1) throw std::invalid_argument("config: classical.stages must be >= 1");
    }
    if (linf_step && !(*linf_step > 0.0)) throw std::invalid_argument("config: linf_step must be positive");
  }
};

inline ReferenceKind reference_kind_from_string(const std::string& s) {
  if (s == "auto") return ReferenceKind::Auto;
  if (s == "analytic") return ReferenceKind::Analytic;
  if (s == "refined") return ReferenceKind::Refined;
  if (s == "radau") return ReferenceKind::Radau;
  if (s == "none") return ReferenceKind::None;
  throw std::invalid_argument("unknown reference kind '" + s + "'");
}

inline NewtonConfig newton_from_json(const nlohmann::json& j) {
  NewtonConfig n;
  n.max_iter = j.value("max_iter", n.max_iter);
  n.abs_tol = j.value("abs_tol", n.abs_tol);
  n.rel_tol = j.value("rel_tol", n.rel_tol);
  n.damping = j.value("damping", n.damping);
  n.retry_with_damping = j.value("retry_with_damping", n.retry_with_damping);
  return n;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  ExperimentConfig c;
  if (!j.contains("problem")) throw std::invalid_argument("config: 'problem' missing");
  const auto& p = j.at("problem");
  if (p.is_string()) {
    c.problem_name = p.get<std::string>();
  } else {
    c.problem_name = p.at("name").get<std::string>();
    if (p.contains("params")) c.problem_params = p.at("params");
  }
  c.scheme = j.value("scheme", c.scheme);
  if (j.contains("mode")) c.mode = mode_from_string(j.at("mode").get<std::string>());
  c.initial_intervals = j.value("initial_intervals", c.initial_intervals);
  if (j.contains("newton")) c.adaptive.newton = newton_from_json(j.at("newton"));
  if (j.contains("adaptive")) {
    const auto& a = j.at("adaptive");
    c.adaptive.theta = a.value("theta", c.adaptive.theta);
    if (a.contains("marking")) c.adaptive.marking = marking_from_string(a.at("marking").get<std::string>());
    if (a.contains("max_iterations")) c.adaptive.stop.max_iterations = a.at("max_iterations").get<int>();
    if (a.contains("target_eta")) c.adaptive.stop.target_eta = a.at("target_eta").get<double>();
    c.adaptive.stop.max_intervals = a.value("max_intervals", c.adaptive.stop.max_intervals);
    c.adaptive.refine_on_newton_failure = a.value("refine_on_newton_failure", c.adaptive.refine_on_newton_failure);
  }
  if (j.contains("uniform")) c.uniform_levels = j.at("uniform").value("levels", c.uniform_levels);
  if (j.contains("classical")) {
    const auto& cl = j.at("classical");
    if (cl.contains("tolerances")) c.classical_tolerances = cl.at("tolerances").get<std::vector<double>>();
    c.classical_stages = cl.value("stages", c.classical_stages);
  }
  if (j.contains("reference")) {
    const auto& r = j.at("reference");
    if (r.is_string()) {
      c.reference.kind = reference_kind_from_string(r.get<std::string>());
    } else {
      if (r.contains("kind")) c.reference.kind = reference_kind_from_string(r.at("kind").get<std::string>());
      c.reference.levels = r.value("levels", c.reference.levels);
      c.reference.tolerance = r.value("tolerance", c.reference.tolerance);
      c.reference.stages = r.value("stages", c.reference.stages);
    }
  }
  if (j.contains("linf_step")) {
    if (j.at("linf_step").is_null()) c.linf_step.reset();
    else c.linf_step = j.at("linf_step").get<double>();
  }
  if (j.contains("output")) {
    c.csv_path = j.at("output").value("csv", std::string{});
    c.jsonl_path = j.at("output").value("jsonl", std::string{});
  }
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

struct ResultRow {
  std::string mode;
  int iter = 0;
  std::size_t n_intervals = 0;
  double eta_total = 0.0;
  std::optional<double> h1_error;
  std::optional<double> linf_error;
  std::optional<double> linf_bound;
  double solve_seconds = 0.0;
  double cumulative_seconds = 0.0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::optional<TimeMesh> final_mesh;
  std::optional<LocalEstimates> final_estimates;
  std::string reference_provenance;  // empty when no reference was used
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

inline std::optional<double> finite_or_none(double v) {
  if (std::isfinite(v)) return v;
  return std::nullopt;
}

inline std::optional<ReferenceSolution> make_reference(const ExperimentConfig& cfg, const OdeProblem& problem,
                                                       const CpgScheme& scheme, const TimeMesh* finest) {
  ReferenceKind kind = cfg.reference.kind;
  if (kind == ReferenceKind::Auto) kind = problem.exact ? ReferenceKind::Analytic : ReferenceKind::Refined;
  switch (kind) {
    case ReferenceKind::None: return std::nullopt;
    case ReferenceKind::Analytic: return ReferenceSolution::analytic(problem);
    case ReferenceKind::Refined: {
      if (!finest) return std::nullopt;
      const TimeMesh fine = finest->refine_uniformly(cfg.reference.levels);
      SolveResult r = solve(problem, fine, scheme, cfg.adaptive.newton);
      if (!r.report.all_converged())
        throw std::runtime_error("reference solve: Newton failed on " + std::to_string(r.report.failures()) +
                                 " intervals");
      return ReferenceSolution::from_spline(std::move(r.solution),
                                            "finest mesh + " + std::to_string(cfg.reference.levels) + " uniform levels",
                                            0.0);
    }
    case ReferenceKind::Radau: {
      ClassicalConfig cc;
      cc.rtol = cc.atol = cfg.reference.tolerance;
      cc.stages = cfg.reference.stages;
      cc.newton = cfg.adaptive.newton;
      ClassicalResult r = classical_radau(problem, cc);
      return ReferenceSolution::from_spline(std::move(r.solution), "classical radau", cfg.reference.tolerance);
    }
    case ReferenceKind::Auto: break;
  }
  return std::nullopt;
}

inline void fill_errors(ResultRow& row, const SplineSolution& y, const OdeProblem& problem,
                        const std::optional<ReferenceSolution>& ref, const std::optional<double>& linf_step) {
  if (!ref) return;
  row.h1_error = finite_or_none(h1_error(y, *ref, problem.weight));
  if (linf_step) row.linf_error = finite_or_none(linf_sampled(y, *ref, *linf_step));
}

inline std::optional<double> bound_for(const OdeProblem& problem, const LocalEstimates& est) {
  if (!problem.lipschitz) return std::nullopt;
  return finite_or_none(linf_bound(est, *problem.lipschitz, problem.t0, problem.t_end));
}

}  // namespace detail

inline std::vector<ResultRow> classical_radau_baseline(const OdeProblem& problem, const std::vector<double>& tolerances,
                                                       int stages, const std::optional<ReferenceSolution>& ref,
                                                       std::optional<double> linf_step = 0.1,
                                                       const NewtonConfig& newton = {}) {
  std::vector<ResultRow> rows;
  double cumulative = 0.0;
  const CpgScheme scheme(build_rule(QuadFamily::RadauRight, stages));
  int iter = 0;
  for (double tol : tolerances) {
    ClassicalConfig cc;
    cc.rtol = cc.atol = tol;
    cc.stages = stages;
    cc.newton = newton;
    const auto start = std::chrono::steady_clock::now();
    ClassicalResult r = classical_radau(problem, cc);
    const double secs = detail::seconds_since(start);
    cumulative += secs;
    const LocalEstimates est = estimate(problem, r.solution);
    ResultRow row;
    row.mode = to_string(Mode::ClassicalRadau);
    row.iter = iter++;
    row.n_intervals = r.accepted;
    row.eta_total = est.total();
    row.linf_bound = detail::bound_for(problem, est);
    row.solve_seconds = secs;
    row.cumulative_seconds = cumulative;
    detail::fill_errors(row, r.solution, problem, ref, linf_step);
    rows.push_back(row);
  }
  return rows;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const OdeProblem problem = make_problem(cfg.problem_name, cfg.problem_params);
  const TimeMesh initial = TimeMesh::make_initial(problem.t0, problem.t_end, cfg.initial_intervals);
  ExperimentResult out;

  if (cfg.mode == Mode::ClassicalRadau) {
    const CpgScheme ref_scheme(build_rule(QuadFamily::RadauRight, cfg.classical_stages));
    ReferenceSpec spec = cfg.reference;
    // no mesh of our own to refine: fall back to a tight controller run
    if (spec.kind == ReferenceKind::Refined || (spec.kind == ReferenceKind::Auto && !problem.exact))
      spec.kind = ReferenceKind::Radau;
    ExperimentConfig c2 = cfg;
    c2.reference = spec;
    const auto ref = detail::make_reference(c2, problem, ref_scheme, nullptr);
    if (ref) out.reference_provenance = ref->provenance();
    out.rows = classical_radau_baseline(problem, cfg.classical_tolerances, cfg.classical_stages, ref, cfg.linf_step,
                                        cfg.adaptive.newton);
    return out;
  }

  const CpgScheme scheme(parse_scheme(cfg.scheme));
  std::vector<SplineSolution> solutions;
  std::vector<LocalEstimates> estimates;

  if (cfg.mode == Mode::Uniform) {
    TimeMesh mesh = initial;
    for (unsigned level = 0; level < cfg.uniform_levels; ++level) {
      const auto start = std::chrono::steady_clock::now();
      SolveResult r = solve(problem, mesh, scheme, cfg.adaptive.newton);
      LocalEstimates est = estimate(problem, r.solution);
      const double secs = detail::seconds_since(start);
      ResultRow row;
      row.mode = to_string(Mode::Uniform);
      row.iter = static_cast<int>(level);
      row.n_intervals = mesh.size();
      row.eta_total = est.total();
      row.linf_bound = detail::bound_for(problem, est);
      row.solve_seconds = secs;
      row.cumulative_seconds = secs;  // each level is an independent single pass
      out.rows.push_back(row);
      solutions.push_back(std::move(r.solution));
      estimates.push_back(std::move(est));
      if (level + 1 < cfg.uniform_levels) mesh = mesh.bisect_all();
    }
  } else {
    auto observer = [&](const IterationRecord& rec, const SplineSolution& y, const LocalEstimates& est,
                        const NewtonReport&) {
      ResultRow row;
      row.mode = to_string(Mode::Adaptive);
      row.iter = rec.iter;
      row.n_intervals = rec.n_intervals;
      row.eta_total = rec.eta_total;
      row.linf_bound = detail::bound_for(problem, est);
      row.solve_seconds = rec.solve_seconds;
      row.cumulative_seconds = rec.cumulative_seconds;
      out.rows.push_back(row);
      solutions.push_back(y);
      estimates.push_back(est);
      return true;
    };
    (void)run_adaptive(problem, initial, scheme, cfg.adaptive, observer);
  }

  const TimeMesh& finest = solutions.back().mesh();
  out.final_mesh = finest;
  out.final_estimates = estimates.back();
  const auto ref = detail::make_reference(cfg, problem, scheme, &finest);
  if (ref) out.reference_provenance = ref->provenance();
  for (std::size_t k = 0; k < out.rows.size(); ++k)
    detail::fill_errors(out.rows[k], solutions[k], problem, ref, cfg.linf_step);
  return out;
}

// ---------------------------------------------------------------------------
// output

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{"mode",       "iter",       "n_intervals",   "eta_total",
                                             "h1_error",   "linf_error", "linf_bound",    "solve_seconds",
                                             "cumulative_seconds"};
  return cols;
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_double(*v) : std::string{}; }

}  // namespace detail

inline std::string to_csv(const std::vector<ResultRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("emit: result table is empty");
  std::ostringstream os;
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : rows) {
    os << r.mode << ',' << r.iter << ',' << r.n_intervals << ',' << detail::fmt_double(r.eta_total) << ','
       << detail::fmt_opt(r.h1_error) << ',' << detail::fmt_opt(r.linf_error) << ',' << detail::fmt_opt(r.linf_bound)
       << ',' << detail::fmt_double(r.solve_seconds) << ',' << detail::fmt_double(r.cumulative_seconds) << '\n';
  }
  return os.str();
}

inline nlohmann::json to_json(const ResultRow& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"mode", r.mode},
          {"iter", r.iter},
          {"n_intervals", r.n_intervals},
          {"eta_total", r.eta_total},
          {"h1_error", opt(r.h1_error)},
          {"linf_error", opt(r.linf_error)},
          {"linf_bound", opt(r.linf_bound)},
          {"solve_seconds", r.solve_seconds},
          {"cumulative_seconds", r.cumulative_seconds}};
}

inline ResultRow row_from_json(const nlohmann::json& j) {
  auto opt = [&](const char* k) -> std::optional<double> {
    if (!j.contains(k) || j.at(k).is_null()) return std::nullopt;
    return j.at(k).get<double>();
  };
  ResultRow r;
  r.mode = j.at("mode").get<std::string>();
  r.iter = j.at("iter").get<int>();
  r.n_intervals = j.at("n_intervals").get<std::size_t>();
  r.eta_total = j.at("eta_total").get<double>();
  r.h1_error = opt("h1_error");
  r.linf_error = opt("linf_error");
  r.linf_bound = opt("linf_bound");
  r.solve_seconds = j.at("solve_seconds").get<double>();
  r.cumulative_seconds = j.at("cumulative_seconds").get<double>();
  return r;
}

inline std::string to_jsonl(const std::vector<ResultRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("emit: result table is empty");
  std::ostringstream os;
  for (const auto& r : rows) os << to_json(r).dump(-1, ' ', false, nlohmann::json::error_handler_t::strict) << '\n';
  return os.str();
}

inline std::vector<ResultRow> rows_from_jsonl(std::istream& in) {
  std::vector<ResultRow> rows;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(row_from_json(nlohmann::json::parse(line)));
  return rows;
}

/// Parses the CSV written by to_csv. Empty fields become absent values.
inline std::vector<ResultRow> rows_from_csv(std::istream& in) {
  std::vector<ResultRow> rows;
  std::string line;
  if (!std::getline(in, line)) return rows;
  std::vector<std::string> header;
  {
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  if (header != csv_columns()) throw std::invalid_argument("csv: unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != header.size()) throw std::invalid_argument("csv: wrong field count");
    auto opt = [](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return std::stod(s);
    };
    ResultRow r;
    r.mode = cells[0];
    r.iter = std::stoi(cells[1]);
    r.n_intervals = static_cast<std::size_t>(std::stoull(cells[2]));
    r.eta_total = std::stod(cells[3]);
    r.h1_error = opt(cells[4]);
    r.linf_error = opt(cells[5]);
    r.linf_bound = opt(cells[6]);
    r.solve_seconds = std::stod(cells[7]);
    r.cumulative_seconds = std::stod(cells[8]);
    rows.push_back(r);
  }
  return rows;
}

enum class EmitFormat { Csv, Jsonl };

inline void emit(const std::vector<ResultRow>& rows, EmitFormat format, const std::string& path) {
  const std::string text = format == EmitFormat::Csv ? to_csv(rows) : to_jsonl(rows);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace cpgts
