#pragma once

// run_experiment: every seed of a config, optionally on several worker
// threads, with per-seed output directories merged into top-level CSVs.
//
//   <output_dir>/metrics.csv, timing.csv        all seeds, in seed order
//   <output_dir>/seed_<k>/metrics.csv, timing.csv, audit.csv
//   <output_dir>/seed_<k>/journal.txt           league runs only
//   <output_dir>/seed_<k>/<checkpoint>.ckpt

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>
#include <vector>

#include "mmx/harness/config.hpp"
#include "mmx/harness/duel_league.hpp"
#include "mmx/harness/experiment.hpp"
#include "mmx/harness/metrics.hpp"
#include "mmx/harness/tournament.hpp"

namespace mmx {

struct SeedOutput {
  SeedRun run;
  /// Checkpoints written next to the metrics, by id.
  std::vector<TournamentEntry> checkpoints;
};

inline SeedOutput run_league_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto start = pretrain_main(cfg, seed);
  DuelLeague league(cfg, seed, start);
  const auto summary = league.run();
  SeedOutput out;
  out.run.rows = league.rows();
  out.run.audits = league.audits();
  out.run.journal = league.journal().lines();
  out.run.env_steps = summary.env_steps;
  out.run.agent = std::make_shared<Agent>(league.main_agent()->checkpoint());
  out.checkpoints.push_back({"main", league.main_agent(), {}});
  for (const auto& e : league.pool().entries()) {
    if (e.model) out.checkpoints.push_back({e.id, e.model, {}});
  }
  return out;
}

inline SeedOutput run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.environment == "duelsim") return run_league_seed(cfg, seed);
  SeedOutput out;
  out.run = cfg.environment == "tictactoe" ? train_vs_minimax<TicTacToe>(cfg, seed)
                                           : train_vs_minimax<Connect4>(cfg, seed);
  out.checkpoints.push_back({"exploiter", out.run.agent, {}});
  return out;
}

namespace runner_detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + p.string());
  return out;
}

inline void write_seed(const std::filesystem::path& dir, const SeedOutput& s) {
  std::filesystem::create_directories(dir);
  auto metrics = open_out(dir / "metrics.csv");
  write_metrics(metrics, s.run.rows);
  auto timing = open_out(dir / "timing.csv");
  write_timing(timing, s.run.rows);
  auto audit_file = open_out(dir / "audit.csv");
  AuditLog audit(audit_file);
  for (const auto& a : s.run.audits) audit.write(a);
  if (!s.run.journal.empty()) {
    auto journal = open_out(dir / "journal.txt");
    for (const auto& line : s.run.journal) journal << line << '\n';
  }
  for (const auto& c : s.checkpoints) {
    auto ckpt = open_out(dir / (c.id + ".ckpt"));
    c.agent->save(ckpt);
  }
}

}  // namespace runner_detail

/// Runs all seeds and writes their outputs. Returns the per-seed results in
/// seed order.
inline std::vector<SeedOutput> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<SeedOutput> results(cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < cfg.seeds.size();) {
      try {
        results[i] = run_seed(cfg, cfg.seeds[i]);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), cfg.seeds.size());
  std::vector<std::jthread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  pool.clear();
  if (failure) std::rethrow_exception(failure);

  std::filesystem::create_directories(cfg.output_dir);
  std::vector<MetricRow> all;
  for (std::size_t i = 0; i < results.size(); ++i) {
    runner_detail::write_seed(cfg.output_dir / ("seed_" + std::to_string(cfg.seeds[i])), results[i]);
    all.insert(all.end(), results[i].run.rows.begin(), results[i].run.rows.end());
  }
  auto metrics = runner_detail::open_out(cfg.output_dir / "metrics.csv");
  write_metrics(metrics, all);
  auto timing = runner_detail::open_out(cfg.output_dir / "timing.csv");
  write_timing(timing, all);
  return results;
}

}  // namespace mmx
