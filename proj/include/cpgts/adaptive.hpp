#pragma once

/// \file adaptive.hpp
/// \brief The adaptive loop SOLVE -> ESTIMATE -> MARK -> REFINE.
///
/// Marking selects a minimal set M with sum_{T in M} v(T) >= theta sum_T v(T),
/// where v is eta^2, its confidence-modified variant, or |T| eta^2 for
/// steering towards the max-norm bound. Marked intervals are bisected.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cpg_solver.hpp"
#include "estimators.hpp"
#include "time_mesh.hpp"

namespace cpgts {

enum class MarkingSource { Raw, Confidence, Linf };

inline std::string_view to_string(MarkingSource m) {
  switch (m) {
    case MarkingSource::Raw: return "raw";
    case MarkingSource::Confidence: return "confidence";
    case MarkingSource::Linf: return "linf";
  }
  return "?";
}

inline MarkingSource marking_from_string(std::string_view s) {
  if (s == "raw") return MarkingSource::Raw;
  if (s == "confidence") return MarkingSource::Confidence;
  if (s == "linf") return MarkingSource::Linf;
  throw std::invalid_argument("unknown marking source '" + std::string(s) + "'");
}

/// Stop rules, OR-combined.
struct StopCriteria {
  std::optional<int> max_iterations;
  std::optional<double> target_eta;
  std::size_t max_intervals = 2'000'000;
};

struct AdaptiveConfig {
  double theta = 0.5;
  MarkingSource marking = MarkingSource::Raw;
  StopCriteria stop;
  NewtonConfig newton;
  /// Also bisect intervals whose Newton solve failed. Outside the scope of
  /// the optimality theory; it helps to reach a feasible mesh on stiff problems.
  bool refine_on_newton_failure = false;
  /// Keep every mesh of the sequence in the result.
  bool keep_meshes = false;

  void validate() const {
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("AdaptiveConfig: theta must lie in (0,1)");
    if (stop.max_iterations && *stop.max_iterations < 1)
      throw std::invalid_argument("AdaptiveConfig: max_iterations must be >= 1");
    if (stop.max_intervals < 1) throw std::invalid_argument("AdaptiveConfig: max_intervals must be >= 1");
  }
};

struct IterationRecord {
  int iter = 0;
  std::size_t n_intervals = 0;
  double eta_total = 0.0;
  std::size_t marked = 0;           // Doerfler marks plus Newton-failure marks
  std::size_t newton_failures = 0;
  std::size_t newton_marked = 0;    // marks added only because Newton failed
  double solve_seconds = 0.0;       // solve + estimate
  double mark_seconds = 0.0;        // marking + bisection bookkeeping
  double cumulative_seconds = 0.0;  // sum of solve_seconds so far
};

struct AdaptiveRecord {
  std::vector<IterationRecord> iterations;
  std::string stop_reason;
};

struct AdaptiveResult {
  AdaptiveRecord record;
  std::vector<TimeMesh> meshes;  // filled when keep_meshes is set
  SplineSolution solution;       // last iterate
  LocalEstimates estimates;
  NewtonReport newton;
};

/// Minimal-cardinality index set with sum >= theta * total: the largest
/// values first, ties broken by lower index. Returned in ascending order.
inline std::vector<std::size_t> doerfler_mark(std::span<const double> values_squared, double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("doerfler_mark: theta must lie in (0,1]");
  std::vector<std::size_t> order(values_squared.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (double v : values_squared)
    if (!(v >= 0.0)) throw std::invalid_argument("doerfler_mark: values must be nonnegative");
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values_squared[a] > values_squared[b]; });
  // summing in the same (descending) order makes the full prefix equal the total
  double total = 0.0;
  for (std::size_t i : order) total += values_squared[i];
  std::vector<std::size_t> marked;
  if (total == 0.0) return marked;
  const double threshold = theta * total;
  double acc = 0.0;
  for (std::size_t i : order) {
    if (acc >= threshold || values_squared[i] == 0.0) break;
    acc += values_squared[i];
    marked.push_back(i);
  }
  std::sort(marked.begin(), marked.end());
  return marked;
}

inline std::vector<double> marking_values(const LocalEstimates& est, MarkingSource src) {
  switch (src) {
    case MarkingSource::Raw: return est.squared();
    case MarkingSource::Confidence: return confidence_modify(est).squared();
    case MarkingSource::Linf: {
      auto v = linf_indicator(est);
      for (double& x : v) x *= x;
      return v;
    }
  }
  return {};
}

/// Return false to stop the loop after the current iteration.
using IterationObserver =
    std::function<bool(const IterationRecord&, const SplineSolution&, const LocalEstimates&, const NewtonReport&)>;

inline AdaptiveResult run_adaptive(const OdeProblem& problem, const TimeMesh& initial, const CpgScheme& scheme,
                                   const AdaptiveConfig& cfg, const IterationObserver& observer = {}) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  const QuadRule norm_rule = estimator_rule(scheme.degree);

  TimeMesh mesh = initial;
  AdaptiveRecord record;
  std::vector<TimeMesh> meshes;
  double cumulative = 0.0;

  for (int iter = 0;; ++iter) {
    const auto t_start = clock::now();
    SolveResult sr = solve(problem, mesh, scheme, cfg.newton);
    LocalEstimates est = estimate(problem, sr.solution, norm_rule);
    const double solve_seconds = std::chrono::duration<double>(clock::now() - t_start).count();
    cumulative += solve_seconds;

    IterationRecord rec;
    rec.iter = iter;
    rec.n_intervals = mesh.size();
    rec.eta_total = est.total();
    rec.newton_failures = sr.report.failures();
    rec.solve_seconds = solve_seconds;
    rec.cumulative_seconds = cumulative;
    if (cfg.keep_meshes) meshes.push_back(mesh);

    std::string stop;
    if (cfg.stop.max_iterations && iter + 1 >= *cfg.stop.max_iterations) stop = "max_iterations";
    else if (cfg.stop.target_eta && rec.eta_total <= *cfg.stop.target_eta && rec.newton_failures == 0) stop = "target_eta";
    else if (mesh.size() >= cfg.stop.max_intervals) stop = "max_intervals";

    std::vector<std::size_t> marked;
    const auto t_mark = clock::now();
    if (stop.empty()) {
      marked = doerfler_mark(marking_values(est, cfg.marking), cfg.theta);
      if (cfg.refine_on_newton_failure) {
        std::vector<std::size_t> failed = sr.report.failed_intervals();
        std::vector<std::size_t> merged;
        std::set_union(marked.begin(), marked.end(), failed.begin(), failed.end(), std::back_inserter(merged));
        rec.newton_marked = merged.size() - marked.size();
        marked = std::move(merged);
      }
      if (marked.empty()) stop = "nothing_marked";
    }
    rec.marked = marked.size();
    rec.mark_seconds = std::chrono::duration<double>(clock::now() - t_mark).count();
    record.iterations.push_back(rec);

    if (observer && !observer(rec, sr.solution, est, sr.report) && stop.empty()) stop = "observer";
    if (!stop.empty()) {
      record.stop_reason = stop;
      return {std::move(record), std::move(meshes), std::move(sr.solution), std::move(est), std::move(sr.report)};
    }
    const auto t_refine = clock::now();
    mesh = mesh.bisect(marked);
    record.iterations.back().mark_seconds += std::chrono::duration<double>(clock::now() - t_refine).count();
  }
}

inline AdaptiveResult run_adaptive(const OdeProblem& problem, const TimeMesh& initial, const QuadRule& rule,
                                   const AdaptiveConfig& cfg, const IterationObserver& observer = {}) {
  return run_adaptive(problem, initial, CpgScheme(rule), cfg, observer);
}

/// Least-squares slope of log(eta) against log(#T) over the last half of the
/// data (at least four points required).
inline double observed_rate(std::span<const double> n_intervals, std::span<const double> eta) {
  if (n_intervals.size() != eta.size()) throw std::invalid_argument("observed_rate: length mismatch");
  if (n_intervals.size() < 4) throw std::invalid_argument("observed_rate: need at least 4 data points");
  const std::size_t count = (n_intervals.size() + 1) / 2;
  const std::size_t first = n_intervals.size() - count;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = first; i < n_intervals.size(); ++i) {
    if (!(n_intervals[i] > 0.0) || !(eta[i] > 0.0)) throw std::invalid_argument("observed_rate: values must be positive");
    const double x = std::log(n_intervals[i]), y = std::log(eta[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double c = static_cast<double>(count);
  const double den = c * sxx - sx * sx;
  if (!(den > 0.0)) throw std::invalid_argument("observed_rate: interval counts do not vary");
  return (c * sxy - sx * sy) / den;
}

inline double observed_rate(const AdaptiveRecord& record) {
  std::vector<double> n, e;
  for (const auto& r : record.iterations) {
    n.push_back(static_cast<double>(r.n_intervals));
    e.push_back(r.eta_total);
  }
  return observed_rate(n, e);
}

inline nlohmann::json to_json(const IterationRecord& r) {
  return {{"iter", r.iter},
          {"n_intervals", r.n_intervals},
          {"eta_total", r.eta_total},
          {"marked", r.marked},
          {"newton_failures", r.newton_failures},
          {"newton_marked", r.newton_marked},
          {"solve_seconds", r.solve_seconds},
          {"mark_seconds", r.mark_seconds},
          {"cumulative_seconds", r.cumulative_seconds}};
}

/// One JSON object per iteration, newline separated.
inline std::string to_jsonl(const AdaptiveRecord& record) {
  std::ostringstream os;
  for (const auto& r : record.iterations) os << to_json(r).dump() << '\n';
  return os.str();
}

}  // namespace cpgts
