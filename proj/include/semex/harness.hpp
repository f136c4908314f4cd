#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "semex/config.hpp"
#include "semex/explorer.hpp"
#include "semex/io.hpp"
#include "semex/sim_world.hpp"

namespace semex {

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct BatchRun {
  std::string world;
  RunSummary summary;
};

struct BatchAggregate {
  std::string method;
  int total_runs = 0;
  int failed_runs = 0;  // collision aborts, excluded from the medians
  std::optional<double> median_ate;
  std::optional<double> median_map_error;
  std::optional<double> median_mean_iou;
  std::optional<double> median_coverage_ratio;
  std::optional<double> median_steps_to_90pct;
};

struct BatchResult {
  std::vector<BatchRun> runs;
  std::vector<BatchAggregate> aggregates;
};

/// Runs every (seed, method) combination on the configured world and
/// aggregates medians per method. Collision aborts are excluded from the
/// medians but counted.
inline BatchResult run_batch(const GroundTruthWorld& world, const RunConfig& base,
                             const std::vector<std::uint64_t>& seeds,
                             const std::vector<std::string>& methods) {
  if (seeds.empty()) throw std::invalid_argument("batch needs at least one seed");
  if (methods.empty()) throw std::invalid_argument("batch needs at least one method");

  BatchResult result;
  for (const std::string& method : methods) {
    BatchAggregate agg;
    agg.method = method;
    std::vector<double> ates, map_errs, ious, ratios, steps90;
    for (const std::uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.method = method;
      cfg.seed = seed;
      const RunResult run = run_exploration(world, cfg);
      const RunSummary summary = summarize_run(run, world, cfg);
      result.runs.push_back({base.world, summary});
      ++agg.total_runs;
      if (run.status == RunStatus::collision) {
        ++agg.failed_runs;
        continue;
      }
      ates.push_back(summary.ate_rmse);
      if (summary.map_err) map_errs.push_back(*summary.map_err);
      if (summary.mean_iou_value) ious.push_back(*summary.mean_iou_value);
      ratios.push_back(summary.coverage_ratio);
      if (summary.steps_to_90pct) steps90.push_back(*summary.steps_to_90pct);
    }
    if (!ates.empty()) agg.median_ate = median(ates);
    if (!map_errs.empty()) agg.median_map_error = median(map_errs);
    if (!ious.empty()) agg.median_mean_iou = median(ious);
    if (!ratios.empty()) agg.median_coverage_ratio = median(ratios);
    if (!steps90.empty()) agg.median_steps_to_90pct = median(steps90);
    result.aggregates.push_back(agg);
  }
  return result;
}

inline std::string batch_runs_csv(const BatchResult& batch) {
  std::ostringstream os;
  os << "world,seed,method,status,steps,replans,loop_closures,ate_rmse,map_error,mean_iou,"
        "coverage_m2,coverage_ratio,steps_to_90pct\n";
  for (const BatchRun& r : batch.runs) {
    const RunSummary& s = r.summary;
    os << r.world << ',' << s.seed << ',' << s.method << ',' << s.status << ',' << s.steps << ','
       << s.replans << ',' << s.loop_closures << ',' << fmt_double(s.ate_rmse) << ','
       << fmt_optional(s.map_err) << ',' << fmt_optional(s.mean_iou_value) << ','
       << fmt_double(s.coverage_m2) << ',' << fmt_double(s.coverage_ratio) << ','
       << (s.steps_to_90pct ? std::to_string(*s.steps_to_90pct) : "undefined") << '\n';
  }
  return os.str();
}

inline std::string batch_aggregate_csv(const BatchResult& batch) {
  std::ostringstream os;
  os << "method,total_runs,failed_runs,median_ate,median_map_error,median_mean_iou,"
        "median_coverage_ratio,median_steps_to_90pct\n";
  for (const BatchAggregate& a : batch.aggregates)
    os << a.method << ',' << a.total_runs << ',' << a.failed_runs << ','
       << fmt_optional(a.median_ate) << ',' << fmt_optional(a.median_map_error) << ','
       << fmt_optional(a.median_mean_iou) << ',' << fmt_optional(a.median_coverage_ratio) << ','
       << fmt_optional(a.median_steps_to_90pct) << '\n';
  return os.str();
}

}  // namespace semex
