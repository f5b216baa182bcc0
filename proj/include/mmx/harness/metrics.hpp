#pragma once

// Metric rows, their CSV files and the aggregated curve data.
//
// Wall-clock seconds live in a separate timing file so the metrics file of a
// step-budgeted run is bit-identical across reruns.

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mmx/error.hpp"

namespace mmx {

struct MetricRow {
  std::uint64_t seed = 0;
  std::int64_t env_steps = 0;
  std::int64_t episodes = 0;
  double wall_seconds = 0.0;
  /// Mean terminal reward (in units of the win reward) over the evaluation.
  double eval_score = 0.0;
  double win_rate = 0.0;
  int generation = 0;
};

inline constexpr const char* kMetricsHeader = "seed,env_steps,episodes,eval_score,win_rate,generation";
inline constexpr const char* kTimingHeader = "seed,env_steps,wall_seconds";

inline void write_metrics(std::ostream& out, const std::vector<MetricRow>& rows) {
  out << kMetricsHeader << '\n';
  out << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.seed << ',' << r.env_steps << ',' << r.episodes << ',' << r.eval_score << ','
        << r.win_rate << ',' << r.generation << '\n';
  }
}

inline void write_timing(std::ostream& out, const std::vector<MetricRow>& rows) {
  out << kTimingHeader << '\n';
  out << std::setprecision(6) << std::fixed;
  for (const auto& r : rows) out << r.seed << ',' << r.env_steps << ',' << r.wall_seconds << '\n';
}

inline std::vector<MetricRow> read_metrics(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw Error(Errc::Io, "metrics file must start with '" + std::string(kMetricsHeader) + "'");
  }
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    MetricRow r;
    if (!(fields >> r.seed >> r.env_steps >> r.episodes >> r.eval_score >> r.win_rate >>
          r.generation)) {
      throw Error(Errc::Io, "malformed metrics row");
    }
    rows.push_back(r);
  }
  return rows;
}

/// Env steps at the first evaluation scoring at least `threshold`.
inline std::optional<std::int64_t> steps_to_threshold(const std::vector<MetricRow>& rows,
                                                      double threshold) {
  for (const auto& r : rows) {
    if (r.eval_score >= threshold) return r.env_steps;
  }
  return std::nullopt;
}

struct CurveInput {
  std::string label;
  std::vector<MetricRow> rows;
};

struct CurvePoint {
  std::string label;
  std::int64_t episodes = 0;
  double mean_env_steps = 0.0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t seeds = 0;
};

namespace curves_detail {

/// Evaluation interval implied by one seed's rows: every row must sit on a
/// multiple of the first row's episode count, in order.
inline std::int64_t grid_of(const std::vector<MetricRow>& rows) {
  const std::int64_t step = rows.front().episodes;
  if (step <= 0) throw Error(Errc::MisalignedGrids, "non-positive episode count in metrics");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].episodes != step * static_cast<std::int64_t>(i + 1)) {
      throw Error(Errc::MisalignedGrids, "rows are not on a regular episode grid");
    }
  }
  return step;
}

}  // namespace curves_detail

/// Per-label mean and min/max band of eval_score across seeds, at every
/// point of the shared episode grid. Seeds that stopped early drop out of
/// the later points.
inline std::vector<CurvePoint> aggregate_curves(const std::vector<CurveInput>& inputs) {
  if (inputs.empty()) throw Error(Errc::Io, "no metrics to aggregate");
  std::optional<std::int64_t> grid;
  std::vector<CurvePoint> out;
  for (const auto& input : inputs) {
    std::map<std::uint64_t, std::vector<MetricRow>> by_seed;
    for (const auto& r : input.rows) by_seed[r.seed].push_back(r);
    std::map<std::int64_t, std::vector<const MetricRow*>> by_point;
    for (const auto& [seed, rows] : by_seed) {
      const auto g = curves_detail::grid_of(rows);
      if (grid && *grid != g) {
        throw Error(Errc::MisalignedGrids, "evaluation interval " + std::to_string(g) +
                                               " differs from " + std::to_string(*grid));
      }
      grid = g;
      for (const auto& r : rows) by_point[r.episodes].push_back(&r);
    }
    for (const auto& [episodes, rows] : by_point) {
      CurvePoint p{input.label, episodes, 0.0, 0.0, rows.front()->eval_score,
                   rows.front()->eval_score, rows.size()};
      for (const auto* r : rows) {
        p.mean += r->eval_score;
        p.mean_env_steps += static_cast<double>(r->env_steps);
        p.min = std::min(p.min, r->eval_score);
        p.max = std::max(p.max, r->eval_score);
      }
      p.mean /= static_cast<double>(rows.size());
      p.mean_env_steps /= static_cast<double>(rows.size());
      out.push_back(p);
    }
  }
  return out;
}

inline void write_curves(std::ostream& out, const std::vector<CurvePoint>& points) {
  out << "label,episodes,mean_env_steps,mean_score,min_score,max_score,seeds\n";
  out << std::setprecision(10);
  for (const auto& p : points) {
    out << p.label << ',' << p.episodes << ',' << p.mean_env_steps << ',' << p.mean << ','
        << p.min << ',' << p.max << ',' << p.seeds << '\n';
  }
}

}  // namespace mmx
