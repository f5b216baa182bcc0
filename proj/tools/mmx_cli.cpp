// mmx_cli: train | tournament | curves | verify
//
// Failures print one line "error: <Code>: <message>" to stderr and exit 1.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmx/games/registry.hpp"
#include "mmx/harness/config.hpp"
#include "mmx/harness/metrics.hpp"
#include "mmx/harness/runner.hpp"
#include "mmx/harness/tournament.hpp"
#include "mmx/harness/verify.hpp"

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw mmx::Error(mmx::Errc::Io, "cannot write " + p.string());
  return out;
}

int train(const fs::path& config, const std::string& output, int workers) {
  auto cfg = mmx::load_config(config);
  if (!output.empty()) cfg.output_dir = output;
  if (workers > 0) cfg.workers = workers;
  const auto results = mmx::run_experiment(cfg);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& run = results[i].run;
    std::cout << cfg.name << " seed " << cfg.seeds[i] << ": " << run.env_steps << " env steps";
    if (!run.rows.empty()) {
      const auto& last = run.rows.back();
      std::cout << ", final score " << last.eval_score << ", generation " << last.generation;
    }
    std::cout << '\n';
  }
  std::cout << "wrote " << (cfg.output_dir / "metrics.csv").string() << '\n';
  return 0;
}

int tournament(const std::string& environment, const std::vector<std::string>& paths, int games,
               int opening, std::uint64_t seed, const fs::path& output) {
  auto env = mmx::make_environment(environment);
  std::vector<mmx::TournamentEntry> entries;
  for (const auto& p : paths) {
    const fs::path path(p);
    entries.push_back({path.parent_path().filename().string() + "/" + path.stem().string(),
                       mmx::load_checkpoint(path), {}});
  }
  const auto results = mmx::run_tournament(entries, *env, {games, opening, seed});
  auto out = open_output(output);
  mmx::write_tournament(out, results);
  mmx::write_tournament(std::cout, results);
  return 0;
}

int curves(const std::vector<std::string>& paths, const fs::path& output) {
  std::vector<mmx::CurveInput> inputs;
  for (const auto& p : paths) {
    std::ifstream in(p);
    if (!in) throw mmx::Error(mmx::Errc::Io, "cannot open " + p);
    // Experiments are labelled by the directory holding their metrics.
    inputs.push_back({fs::path(p).parent_path().filename().string(), mmx::read_metrics(in)});
  }
  auto out = open_output(output);
  mmx::write_curves(out, mmx::aggregate_curves(inputs));
  std::cout << "wrote " << output.string() << '\n';
  return 0;
}

int verify(const fs::path& scratch) {
  bool all = true;
  for (const auto& r : mmx::verify::run_all(scratch)) {
    std::cout << (r.passed ? "PASS" : "FAIL") << " [" << r.criterion << "] " << r.name << ": "
              << r.detail << '\n';
    all &= r.passed;
  }
  return all ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimax exploiter experiments"};
  app.require_subcommand(1);

  auto* train_cmd = app.add_subcommand("train", "Run every seed of an experiment config");
  std::string config_path, train_output;
  int workers = 0;
  train_cmd->add_option("config", config_path, "INI config file")->required();
  train_cmd->add_option("-o,--output", train_output, "Override experiment.output_dir");
  train_cmd->add_option("-j,--workers", workers, "Seeds trained in parallel");

  auto* tour_cmd = app.add_subcommand("tournament", "Round-robin between checkpoints");
  std::vector<std::string> checkpoints;
  std::string environment = "connect4";
  int games = 1000, opening = 2;
  std::uint64_t seed = 0;
  std::string tour_output = "tournament.csv";
  tour_cmd->add_option("checkpoints", checkpoints, "Checkpoint files")->required()->expected(2, -1);
  tour_cmd->add_option("-e,--environment", environment, "tictactoe, connect4 or duelsim");
  tour_cmd->add_option("-g,--games", games, "Games per pairing");
  tour_cmd->add_option("--opening", opening, "Random opening decisions per side");
  tour_cmd->add_option("-s,--seed", seed, "Opening seed");
  tour_cmd->add_option("-o,--output", tour_output, "Output CSV");

  auto* curves_cmd = app.add_subcommand("curves", "Aggregate metrics files into plot data");
  std::vector<std::string> metrics;
  std::string curves_output = "curves.csv";
  curves_cmd->add_option("metrics", metrics, "metrics.csv files, one per experiment")->required();
  curves_cmd->add_option("-o,--output", curves_output, "Output CSV");

  auto* verify_cmd = app.add_subcommand("verify", "Run the invariant and oracle suites");
  std::string scratch = (fs::temp_directory_path() / "mmx_verify").string();
  verify_cmd->add_option("--scratch", scratch, "Directory for fixture checkpoints");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: ConfigInvalid: " << e.what() << '\n';
    return 1;
  }
  try {
    if (*train_cmd) return train(config_path, train_output, workers);
    if (*tour_cmd) return tournament(environment, checkpoints, games, opening, seed, tour_output);
    if (*curves_cmd) return curves(metrics, curves_output);
    if (*verify_cmd) return verify(scratch);
  } catch (const mmx::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Io: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
