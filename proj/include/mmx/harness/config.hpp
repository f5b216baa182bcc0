#pragma once

// Experiment configuration: an INI file with [experiment], [exploiter],
// [agent], [opponent] and [league] sections. Unknown keys are rejected so a
// typo cannot silently fall back to a default. See configs/ for samples.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mmx/dqn.hpp"
#include "mmx/exploiter.hpp"
#include "mmx/games/registry.hpp"

namespace mmx {

struct Budget {
  std::optional<std::int64_t> max_env_steps;
  std::optional<double> max_wall_seconds;
};

struct LeagueConfig {
  double threshold = 0.85;
  std::size_t window = 200;
  /// Main Agent episodes between convergence gate evaluations.
  std::int64_t gate_interval = 500;
  /// Cap on scripted-bot pretraining of the initial Main Agent.
  std::int64_t pretrain_max_steps = 3000000;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string environment = "tictactoe";
  ExploiterRewardConfig reward;
  std::vector<int> hidden{64, 64};
  DqnConfig dqn;
  /// One learner update every this many exploiter transitions.
  int train_every = 1;
  Budget budget;
  std::vector<std::uint64_t> seeds{0};
  int eval_interval = 100;
  int eval_episodes = 100;
  /// Stop a seed early once an evaluation reaches this score.
  std::optional<double> stop_score;
  /// Scripted minimax search depth; nullopt searches to the end.
  std::optional<int> opponent_depth;
  LeagueConfig league;
  std::filesystem::path output_dir = "out";
  int workers = 1;

  void validate() const {
    if (std::find(kEnvironmentIds.begin(), kEnvironmentIds.end(), environment) ==
        kEnvironmentIds.end()) {
      throw Error(Errc::EnvironmentUnknown, "unknown environment '" + environment + "'");
    }
    reward.validate();
    dqn.validate();
    if (seeds.empty()) throw Error(Errc::ConfigInvalid, "seeds must not be empty");
    if (!budget.max_env_steps && !budget.max_wall_seconds) {
      throw Error(Errc::ConfigInvalid, "set max_env_steps or max_wall_seconds");
    }
    if (budget.max_env_steps && *budget.max_env_steps <= 0) {
      throw Error(Errc::ConfigInvalid, "max_env_steps must be positive");
    }
    if (budget.max_wall_seconds && !(*budget.max_wall_seconds > 0.0)) {
      throw Error(Errc::ConfigInvalid, "max_wall_seconds must be positive");
    }
    if (eval_interval < 1 || eval_episodes < 1 || train_every < 1 || workers < 1) {
      throw Error(Errc::ConfigInvalid, "eval_interval, eval_episodes, train_every, workers >= 1");
    }
    for (int h : hidden) {
      if (h < 1) throw Error(Errc::ConfigInvalid, "hidden widths must be positive");
    }
    if (opponent_depth && *opponent_depth < 1) {
      throw Error(Errc::ConfigInvalid, "opponent depth must be at least 1");
    }
    if (!(league.threshold > 0.0 && league.threshold <= 1.0) || league.window < 1 ||
        league.gate_interval < 1) {
      throw Error(Errc::ConfigInvalid, "league threshold / window / gate_interval");
    }
  }

  /// Exploiter learner settings after the gamma-zero overlay, if any.
  std::pair<ExploiterRewardConfig, DqnConfig> effective_learner() const {
    auto r = reward;
    auto d = dqn;
    if (r.mode == ExploiterMode::GammaZero) apply_gamma_zero_overlay(r, d);
    return {r, d};
  }
};

namespace config_detail {

template <class T>
T parse_value(const std::string& key, const std::string& raw) {
  std::istringstream in(raw);
  T v{};
  in >> v;
  if (in.fail() || !(in >> std::ws).eof()) {
    throw Error(Errc::ConfigInvalid, "bad value for " + key + ": '" + raw + "'");
  }
  return v;
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& raw) {
  std::vector<T> out;
  std::stringstream in(raw);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(parse_value<T>(key, item.substr(b, item.find_last_not_of(" \t") - b + 1)));
  }
  return out;
}

}  // namespace config_detail

inline ExperimentConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  using config_detail::parse_list;
  using config_detail::parse_value;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(Errc::ConfigInvalid, e.what());
  }

  ExperimentConfig c;
  std::optional<double> alpha;
  const std::set<std::string> sections{"experiment", "exploiter", "agent", "opponent", "league"};
  for (const auto& [section, body] : tree) {
    if (!sections.contains(section) || body.empty()) {
      throw Error(Errc::ConfigInvalid, "unknown section or top-level key '" + section + "'");
    }
    for (const auto& [key, node] : body) {
      const std::string v = node.get_value<std::string>();
      const std::string k = section + "." + key;
      if (v.empty()) continue;  // blank means default
      if (k == "experiment.name") c.name = v;
      else if (k == "experiment.environment") c.environment = v;
      else if (k == "experiment.seeds") c.seeds = parse_list<std::uint64_t>(k, v);
      else if (k == "experiment.max_env_steps") c.budget.max_env_steps = parse_value<std::int64_t>(k, v);
      else if (k == "experiment.max_wall_seconds") c.budget.max_wall_seconds = parse_value<double>(k, v);
      else if (k == "experiment.eval_interval") c.eval_interval = parse_value<int>(k, v);
      else if (k == "experiment.eval_episodes") c.eval_episodes = parse_value<int>(k, v);
      else if (k == "experiment.stop_score") c.stop_score = parse_value<double>(k, v);
      else if (k == "experiment.output_dir") c.output_dir = v;
      else if (k == "experiment.workers") c.workers = parse_value<int>(k, v);
      else if (k == "exploiter.mode") c.reward.mode = parse_mode(v);
      else if (k == "exploiter.alpha") alpha = parse_value<double>(k, v);
      else if (k == "exploiter.gamma") c.reward.gamma = parse_value<double>(k, v);
      else if (k == "exploiter.hit_reward") c.reward.hit_reward = parse_value<double>(k, v);
      else if (k == "agent.hidden") c.hidden = parse_list<int>(k, v);
      else if (k == "agent.td_gamma") c.dqn.gamma = parse_value<double>(k, v);
      else if (k == "agent.epsilon") c.dqn.epsilon = parse_value<double>(k, v);
      else if (k == "agent.learning_rate") c.dqn.learning_rate = parse_value<double>(k, v);
      else if (k == "agent.batch_size") c.dqn.batch_size = parse_value<std::size_t>(k, v);
      else if (k == "agent.replay_capacity") c.dqn.replay_capacity = parse_value<std::size_t>(k, v);
      else if (k == "agent.target_sync_period") c.dqn.target_sync_period = parse_value<std::int64_t>(k, v);
      else if (k == "agent.learn_start") c.dqn.learn_start = parse_value<std::size_t>(k, v);
      else if (k == "agent.train_every") c.train_every = parse_value<int>(k, v);
      else if (k == "agent.loss") {
        if (v != "mse" && v != "huber") throw Error(Errc::ConfigInvalid, "loss must be mse or huber");
        c.dqn.loss = v == "huber" ? Loss::Huber : Loss::MeanSquared;
      }
      else if (k == "opponent.depth") c.opponent_depth = parse_value<int>(k, v);
      else if (k == "league.threshold") c.league.threshold = parse_value<double>(k, v);
      else if (k == "league.window") c.league.window = parse_value<std::size_t>(k, v);
      else if (k == "league.gate_interval") c.league.gate_interval = parse_value<std::int64_t>(k, v);
      else if (k == "league.pretrain_max_steps") c.league.pretrain_max_steps = parse_value<std::int64_t>(k, v);
      else throw Error(Errc::ConfigInvalid, "unknown key '" + k + "'");
    }
  }

  // Reward bounds follow the environment's terminal rewards.
  const double scale = make_environment(c.environment)->reward_scale();
  const auto mode = c.reward.mode;
  auto base = c.reward;
  c.reward = ExploiterRewardConfig::for_bounds(mode, alpha.value_or(base.alpha), -scale, scale);
  c.reward.gamma = base.gamma;
  c.reward.hit_reward = base.hit_reward;
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open config " + path.string());
  return parse_config(in);
}

}  // namespace mmx
