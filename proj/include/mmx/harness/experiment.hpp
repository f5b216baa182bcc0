#pragma once

// Exploiter training against a scripted minimax opponent on the turn-based
// games, with periodic greedy evaluation.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mmx/dqn.hpp"
#include "mmx/exploiter.hpp"
#include "mmx/games/connect4.hpp"
#include "mmx/games/tictactoe.hpp"
#include "mmx/harness/config.hpp"
#include "mmx/harness/metrics.hpp"
#include "mmx/minimax.hpp"

namespace mmx {

/// Independent generator for one purpose within a seed's run.
inline Rng rng_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x6d6d78u};
  return Rng(seq);
}

enum Stream : std::uint64_t { kInit = 1, kAct, kOpponent, kLearn, kEval, kLeague, kExploiterInit };

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct EvalResult {
  double score = 0.0;
  double win_rate = 0.0;
  double draw_rate = 0.0;
};

/// Greedy agent against the minimax player, alternating who moves first.
template <TurnBasedRules Rules>
EvalResult evaluate_vs_minimax(const Agent& agent, const Minimax<Rules>& scripted, int episodes,
                               Rng& rng) {
  EvalResult r;
  for (int i = 0; i < episodes; ++i) {
    const PlayerRole me = i % 2 == 0 ? PlayerRole::First : PlayerRole::Second;
    auto s = Rules::initial();
    while (Rules::outcome(s) == GameOutcome::Ongoing) {
      int a;
      if (Rules::to_move(s) == me) {
        ActionMask mask(Rules::kNumActions);
        for (int k = 0; k < Rules::kNumActions; ++k) mask[k] = Rules::is_legal(s, k);
        a = agent.greedy_action(board::observe(Rules::cells(s), me), mask);
      } else {
        a = scripted.act(s, opponent(me), rng);
      }
      s = Rules::apply(s, a);
    }
    const double u = utility(Rules::outcome(s), me);
    r.score += u;
    r.win_rate += u > 0;
    r.draw_rate += u == 0;
  }
  r.score /= episodes;
  r.win_rate /= episodes;
  r.draw_rate /= episodes;
  return r;
}

struct SeedRun {
  std::vector<MetricRow> rows;
  std::shared_ptr<Agent> agent;
  std::vector<BatchAudit> audits;
  std::vector<std::string> journal;
  std::int64_t env_steps = 0;
};

inline MlpSpec network_for(const ExperimentConfig& cfg, const Environment& env) {
  MlpSpec spec{env.observation_size(), cfg.hidden, env.num_actions()};
  spec.validate();
  return spec;
}

template <TurnBasedRules Rules>
std::optional<int> default_depth();
template <>
inline std::optional<int> default_depth<TicTacToe>() { return std::nullopt; }
template <>
inline std::optional<int> default_depth<Connect4>() { return 3; }

/// One seed of exploiter training against the scripted minimax player.
template <TurnBasedRules Rules>
SeedRun train_vs_minimax(const ExperimentConfig& cfg, std::uint64_t seed) {
  const Stopwatch clock;
  const auto [reward_cfg, dqn_cfg] = cfg.effective_learner();
  TurnBasedEnv<Rules> env;

  const std::optional<int> depth = cfg.opponent_depth ? cfg.opponent_depth : default_depth<Rules>();
  auto search = std::make_shared<const Minimax<Rules>>(MinimaxConfig{depth, seed});
  const MinimaxEvaluator<Rules> evaluator(search);

  Rng init_rng = rng_stream(seed, kInit);
  Rng act_rng = rng_stream(seed, kAct);
  Rng opp_rng = rng_stream(seed, kOpponent);
  Rng learn_rng = rng_stream(seed, kLearn);
  auto agent = std::make_shared<Agent>(network_for(cfg, env), dqn_cfg, init_rng);
  ReplayBuffer buffer(dqn_cfg.replay_capacity);

  SeedRun run;
  BatchAudit audit;
  std::int64_t transitions = 0;
  for (std::int64_t episode = 0;; ++episode) {
    if (cfg.budget.max_env_steps && run.env_steps >= *cfg.budget.max_env_steps) break;
    if (cfg.budget.max_wall_seconds && clock.seconds() >= *cfg.budget.max_wall_seconds) break;

    const PlayerRole me = episode % 2 == 0 ? PlayerRole::First : PlayerRole::Second;
    std::array<Policy, 2> policies;
    policies[index(me)] = [&](const Observation& obs, const ActionMask& mask) {
      return agent->select_action(obs, mask, act_rng);
    };
    policies[index(opponent(me))] = [&](const Observation& obs, const ActionMask&) {
      const auto s = Rules::decode(obs);
      return search->act(s, Rules::to_move(s), opp_rng);
    };
    const auto trace = run_episode(env, seed, static_cast<std::uint64_t>(episode), policies);
    run.env_steps += static_cast<std::int64_t>(trace.step_rewards.size());

    const auto paired = pair_transitions(trace.role(me), trace.role(opponent(me)));
    for (auto& t : transform_batch(paired, &evaluator, reward_cfg, &audit)) {
      buffer.push(std::move(t));
      ++transitions;
      if (buffer.size() >= std::max<std::size_t>(dqn_cfg.learn_start, 1) &&
          transitions % cfg.train_every == 0) {
        agent->learn_step(buffer, learn_rng);
      }
    }

    if ((episode + 1) % cfg.eval_interval == 0) {
      Rng eval_rng = rng_stream(seed, kEval);
      const auto e = evaluate_vs_minimax<Rules>(*agent, *search, cfg.eval_episodes, eval_rng);
      run.rows.push_back({seed, run.env_steps, episode + 1, clock.seconds(), e.score, e.win_rate, 0});
      run.audits.push_back(audit);
      audit = {};
      if (cfg.stop_score && e.score >= *cfg.stop_score) break;
    }
  }
  run.agent = agent;
  return run;
}

}  // namespace mmx
