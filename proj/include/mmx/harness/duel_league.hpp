#pragma once

// A desk-scale two-archetype league on DuelSim: one learning Main Agent
// matched against the opponent pool by win-rate, and one Main Exploiter
// trained against a single frozen Main Agent snapshot per generation.
//
// Scheduling is a single thread that alternates one Main Agent episode with
// one exploiter episode while the exploiter is active. Only these training
// episodes count against the step budget; the Main Agent's convergence gate
// plays separate evaluation games every `gate_interval` main episodes.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mmx/dqn.hpp"
#include "mmx/exploiter.hpp"
#include "mmx/games/duelsim.hpp"
#include "mmx/harness/config.hpp"
#include "mmx/harness/experiment.hpp"
#include "mmx/league.hpp"

namespace mmx {

/// Rule-based DuelSim fighter. It punishes a stunned opponent and otherwise
/// expects the opponent to repeat its last action and counters it, with a
/// quarter of its choices random.
inline Policy scripted_duel_policy(std::shared_ptr<Rng> rng) {
  return [rng](const Observation& obs, const ActionMask&) {
    constexpr int kAttack = static_cast<int>(DuelAction::Attack);
    constexpr int kBlock = static_cast<int>(DuelAction::Block);
    constexpr int kRecover = static_cast<int>(DuelAction::Recover);
    if (std::uniform_real_distribution<double>(0.0, 1.0)(*rng) < 0.25) {
      return std::uniform_int_distribution<int>(kAttack, kRecover)(*rng);
    }
    if (obs[3] > 0.0) return kAttack;
    if (obs[8 + kAttack] > 0.5) return kBlock;
    if (obs[8 + kBlock] > 0.5) return kRecover;
    return kAttack;
  };
}

inline Policy agent_policy(std::shared_ptr<const Agent> agent, std::shared_ptr<Rng> rng) {
  return [agent, rng](const Observation& obs, const ActionMask& mask) {
    return agent->select_action(obs, mask, *rng);
  };
}

/// Pure function of the seed: the Main Agent before the league starts,
/// trained against the scripted fighter until its last `window` games reach
/// the convergence threshold (or the pretraining cap is hit).
struct PretrainedMain {
  std::shared_ptr<Agent> agent;
  std::int64_t env_steps = 0;
  std::int64_t episodes = 0;
  double win_rate = 0.0;
};

inline PretrainedMain pretrain_main(const ExperimentConfig& cfg, std::uint64_t seed) {
  DuelSimEnv env;
  Rng init_rng = rng_stream(seed, kInit);
  auto act_rng = std::make_shared<Rng>(rng_stream(seed, kAct));
  auto bot_rng = std::make_shared<Rng>(rng_stream(seed, kOpponent));
  Rng learn_rng = rng_stream(seed, kLearn);
  PretrainedMain out;
  out.agent = std::make_shared<Agent>(network_for(cfg, env), cfg.dqn, init_rng);
  ReplayBuffer buffer(cfg.dqn.replay_capacity);
  ConvergenceMonitor monitor(cfg.league.threshold, cfg.league.window);
  monitor.track("scripted");
  std::int64_t transitions = 0;
  const auto bot = scripted_duel_policy(bot_rng);
  while (out.env_steps < cfg.league.pretrain_max_steps) {
    const PlayerRole me = out.episodes % 2 == 0 ? PlayerRole::First : PlayerRole::Second;
    std::array<Policy, 2> policies;
    policies[index(me)] = agent_policy(out.agent, act_rng);
    policies[index(opponent(me))] = bot;
    const auto trace = run_episode(env, seed, static_cast<std::uint64_t>(out.episodes), policies);
    ++out.episodes;
    out.env_steps += static_cast<std::int64_t>(trace.step_rewards.size());
    for (const auto& t : trace.role(me).transitions) {
      buffer.push(t);
      if (buffer.size() >= std::max<std::size_t>(cfg.dqn.learn_start, 1) &&
          ++transitions % cfg.train_every == 0) {
        out.agent->learn_step(buffer, learn_rng);
      }
    }
    monitor.record_result("scripted", result_for(trace.final_outcome, me));
    if (monitor.ready("scripted") && monitor.win_rate("scripted") >= monitor.threshold()) break;
  }
  out.win_rate = monitor.win_rate("scripted");
  return out;
}

struct LeagueSummary {
  int converged_exploiters = 0;
  int generation = 0;
  int main_convergences = 0;
  std::int64_t env_steps = 0;
  std::size_t pool_size = 0;
};

class DuelLeague {
 public:
  DuelLeague(const ExperimentConfig& cfg, std::uint64_t seed, const PretrainedMain& start)
      : cfg_(cfg),
        seed_(seed),
        reward_(cfg.effective_learner().first),
        exploiter_dqn_(cfg.effective_learner().second),
        main_(std::make_shared<Agent>(*start.agent)),
        main_buffer_(cfg.dqn.replay_capacity),
        pool_(cfg.league.window),
        exploiter_monitor_(cfg.league.threshold, cfg.league.window),
        act_rng_(std::make_shared<Rng>(rng_stream(seed, kAct))),
        opp_rng_(std::make_shared<Rng>(rng_stream(seed, kOpponent))),
        learn_rng_(rng_stream(seed, kLearn)),
        league_rng_(rng_stream(seed, kLeague)),
        exploiter_init_rng_(rng_stream(seed, kExploiterInit)),
        journal_(nullptr) {
    pool_.add({"scripted", Archetype::Scripted, nullptr, 0.0, 0});
    state_.main_snapshot = "main-0";
    state_.exploiter_target = "main-0";
    snapshots_["main-0"] = std::make_shared<const Agent>(main_->checkpoint());
    fresh_exploiter();
    journal_.log(0, state_, "league_start", "main-0", pool_.size());
  }

  /// Runs to the configured budget.
  LeagueSummary run() {
    const Stopwatch clock;
    std::int64_t league_episodes = 0;
    std::int64_t next_row = cfg_.eval_interval;
    while (!budget_spent(clock)) {
      main_episode();
      ++league_episodes;
      if (main_episodes_ % cfg_.league.gate_interval == 0) main_gate();
      if (!state_.exploiter_idle && !budget_spent(clock)) {
        exploiter_episode();
        ++league_episodes;
      }
      // Rows sit on the regular episode grid even when one iteration plays
      // two episodes.
      while (league_episodes >= next_row) {
        record_row(next_row, clock.seconds());
        next_row += cfg_.eval_interval;
      }
    }
    return summary();
  }

  LeagueSummary summary() const {
    return {state_.converged_exploiters, state_.generation, state_.main_convergences, env_steps_,
            pool_.size()};
  }
  const std::vector<MetricRow>& rows() const { return rows_; }
  const LeagueJournal& journal() const { return journal_; }
  const std::vector<BatchAudit>& audits() const { return audits_; }
  const OpponentPool& pool() const { return pool_; }
  const GenerationState& state() const { return state_; }
  std::shared_ptr<const Agent> main_agent() const { return main_; }

 private:
  bool budget_spent(const Stopwatch& clock) const {
    if (cfg_.budget.max_env_steps && env_steps_ >= *cfg_.budget.max_env_steps) return true;
    return cfg_.budget.max_wall_seconds && clock.seconds() >= *cfg_.budget.max_wall_seconds;
  }

  Policy pool_policy(std::size_t i) const {
    const auto& e = pool_[i];
    return e.model ? agent_policy(e.model, opp_rng_) : scripted_duel_policy(opp_rng_);
  }

  void fresh_exploiter() {
    exploiter_ = std::make_shared<Agent>(main_->spec(), exploiter_dqn_, exploiter_init_rng_);
    exploiter_buffer_ = std::make_unique<ReplayBuffer>(exploiter_dqn_.replay_capacity);
    exploiter_monitor_.track(state_.exploiter_target);
    exploiter_monitor_.reset(state_.exploiter_target);
    exploiter_transitions_ = 0;
  }

  void learn(Agent& agent, ReplayBuffer& buffer, std::int64_t& counter) {
    if (buffer.size() >= std::max<std::size_t>(agent.config().learn_start, 1) &&
        ++counter % cfg_.train_every == 0) {
      agent.learn_step(buffer, learn_rng_);
    }
  }

  void main_episode() {
    const std::size_t opp = sample_opponent(pool_, league_rng_);
    const PlayerRole me = main_episodes_ % 2 == 0 ? PlayerRole::First : PlayerRole::Second;
    std::array<Policy, 2> policies;
    policies[index(me)] = agent_policy(main_, act_rng_);
    policies[index(opponent(me))] = pool_policy(opp);
    const auto trace = run_episode(env_, seed_, episode_id_++, policies);
    env_steps_ += static_cast<std::int64_t>(trace.step_rewards.size());
    ++main_episodes_;
    for (const auto& t : trace.role(me).transitions) {
      main_buffer_.push(t);
      learn(*main_, main_buffer_, main_transitions_);
    }
    const auto result = result_for(trace.final_outcome, me);
    pool_.record_main_result(opp, result);
    main_recent_.push_back(result == MatchResult::Win);
    if (main_recent_.size() > cfg_.league.window) main_recent_.erase(main_recent_.begin());
  }

  /// Plays `window` evaluation games against every pool member, hardest
  /// first, and stops at the first member the Main Agent fails to beat.
  void main_gate() {
    std::vector<std::size_t> order(pool_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return pool_[a].win_rate_vs_main > pool_[b].win_rate_vs_main;
    });
    ConvergenceMonitor gate(cfg_.league.threshold, cfg_.league.window);
    auto frozen_main = std::make_shared<const Agent>(main_->checkpoint());
    for (std::size_t i : order) {
      const auto& id = pool_[i].id;
      gate.track(id);
      for (std::size_t g = 0; g < cfg_.league.window; ++g) {
        const PlayerRole me = g % 2 == 0 ? PlayerRole::First : PlayerRole::Second;
        std::array<Policy, 2> policies;
        policies[index(me)] = agent_policy(frozen_main, act_rng_);
        policies[index(opponent(me))] = pool_policy(i);
        const auto trace = run_episode(env_, seed_, episode_id_++, policies);
        gate.record_result(id, result_for(trace.final_outcome, me));
      }
      if (gate.win_rate(id) < gate.threshold()) return;
    }
    if (!main_converged(gate, pool_)) return;

    const std::string id = "main-" + std::to_string(state_.main_convergences + 1);
    snapshots_[id] = frozen_main;
    const auto next = advance_generation(
        state_, {LeagueEventKind::MainConverged, {id, Archetype::MainAgentSnapshot, frozen_main, 0.0, 0}, id},
        pool_);
    state_ = next.state;
    journal_.log(env_steps_, state_, "main_converged", id, pool_.size());
    if (next.reset_exploiter) {
      fresh_exploiter();
      journal_.log(env_steps_, state_, "exploiter_retarget", state_.exploiter_target, pool_.size());
    }
  }

  void exploiter_episode() {
    const auto& target_id = state_.exploiter_target;
    const auto target = snapshots_.at(target_id);
    const PlayerRole me = exploiter_episodes_ % 2 == 0 ? PlayerRole::First : PlayerRole::Second;
    std::array<Policy, 2> policies;
    policies[index(me)] = agent_policy(exploiter_, act_rng_);
    policies[index(opponent(me))] = agent_policy(target, opp_rng_);
    const auto trace = run_episode(env_, seed_, episode_id_++, policies);
    env_steps_ += static_cast<std::int64_t>(trace.step_rewards.size());
    ++exploiter_episodes_;

    const auto paired = pair_transitions(trace.role(me), trace.role(opponent(me)));
    const QNetworkEvaluator evaluator(target);
    for (auto& t : transform_batch(paired, &evaluator, reward_, &audit_)) {
      exploiter_buffer_->push(std::move(t));
      learn(*exploiter_, *exploiter_buffer_, exploiter_transitions_);
    }
    exploiter_monitor_.record_result(target_id, result_for(trace.final_outcome, me));
    if (!exploiter_monitor_.ready(target_id) || !exploiter_converged(exploiter_monitor_, target_id)) {
      return;
    }

    const std::string id = "exploiter-" + std::to_string(state_.converged_exploiters);
    auto frozen = std::make_shared<const Agent>(exploiter_->checkpoint());
    const auto next = advance_generation(
        state_, {LeagueEventKind::ExploiterConverged, {id, Archetype::ConvergedExploiter, frozen, 0.0, 0}, ""},
        pool_);
    state_ = next.state;
    journal_.log(env_steps_, state_, "exploiter_converged", id, pool_.size());
    if (next.reset_exploiter) {
      fresh_exploiter();
      journal_.log(env_steps_, state_, "exploiter_retarget", state_.exploiter_target, pool_.size());
    } else {
      journal_.log(env_steps_, state_, "exploiter_idle", target_id, pool_.size());
    }
  }

  void record_row(std::int64_t league_episodes, double seconds) {
    const auto& target = state_.exploiter_target;
    const double exploiter_rate =
        state_.exploiter_idle ? 1.0 : exploiter_monitor_.win_rate(target);
    const double main_rate =
        main_recent_.empty()
            ? 0.0
            : static_cast<double>(std::count(main_recent_.begin(), main_recent_.end(), true)) /
                  static_cast<double>(main_recent_.size());
    rows_.push_back({seed_, env_steps_, league_episodes, seconds, exploiter_rate, main_rate,
                     state_.converged_exploiters});
    audits_.push_back(audit_);
    audit_ = {};
  }

  const ExperimentConfig& cfg_;
  std::uint64_t seed_;
  ExploiterRewardConfig reward_;
  DqnConfig exploiter_dqn_;
  DuelSimEnv env_;

  std::shared_ptr<Agent> main_;
  ReplayBuffer main_buffer_;
  std::int64_t main_transitions_ = 0;
  std::int64_t main_episodes_ = 0;
  std::vector<bool> main_recent_;

  std::shared_ptr<Agent> exploiter_;
  std::unique_ptr<ReplayBuffer> exploiter_buffer_;
  std::int64_t exploiter_transitions_ = 0;
  std::int64_t exploiter_episodes_ = 0;

  OpponentPool pool_;
  std::map<std::string, std::shared_ptr<const Agent>> snapshots_;
  ConvergenceMonitor exploiter_monitor_;
  GenerationState state_;

  std::shared_ptr<Rng> act_rng_;
  std::shared_ptr<Rng> opp_rng_;
  Rng learn_rng_;
  Rng league_rng_;
  Rng exploiter_init_rng_;

  std::int64_t env_steps_ = 0;
  std::uint64_t episode_id_ = 0;
  BatchAudit audit_;
  std::vector<BatchAudit> audits_;
  std::vector<MetricRow> rows_;
  LeagueJournal journal_;
};

}  // namespace mmx
