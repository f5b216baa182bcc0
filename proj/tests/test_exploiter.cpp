#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "mmx/exploiter.hpp"
#include "mmx/games/duelsim.hpp"
#include "mmx/games/tictactoe.hpp"
#include "test_util.hpp"

namespace mmx {
namespace {

ExploiterRewardConfig minimax_cfg(double alpha = 0.1) {
  return ExploiterRewardConfig::for_bounds(ExploiterMode::Minimax, alpha, -1.0, 1.0);
}

Transition at(std::int64_t tick, double reward = 0.0, bool done = false) {
  Transition t;
  t.state = {static_cast<double>(tick)};
  t.legal = {true, true};
  t.next_state = {static_cast<double>(tick + 1)};
  t.next_legal = {!done, !done};
  t.timestamp = tick;
  t.reward = reward;
  t.done = done;
  return t;
}

RoleTrace trace_of(std::vector<std::int64_t> ticks, PlayerRole role, std::uint64_t episode = 1) {
  RoleTrace r{episode, role, {}};
  for (auto t : ticks) r.transitions.push_back(at(t));
  return r;
}

TEST(MinimaxReward, Examples) {
  const auto cfg = minimax_cfg();
  EXPECT_NEAR(minimax_reward(0.0, -0.2, false, cfg), -0.07960, 1e-12);
  EXPECT_EQ(minimax_reward(1.0, 123.0, true, cfg), 1.0);
  EXPECT_EQ(minimax_reward(0.3, 0.7, false, minimax_cfg(0.0)), 0.3);
}

TEST(MinimaxReward, NonFiniteInputsRejected) {
  const auto cfg = minimax_cfg();
  for (double bad : {std::nan(""), std::numeric_limits<double>::infinity()}) {
    try {
      minimax_reward(0.0, bad, false, cfg);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::NonFiniteInput);
    }
    EXPECT_THROW(minimax_reward(bad, 0.0, false, cfg), Error);
  }
}

TEST(MinimaxReward, ShapingIsNonPositiveInsideBounds) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double r_min = -5.0 * u(rng);
    const double r_max = 5.0 * u(rng);
    auto cfg = ExploiterRewardConfig::for_bounds(ExploiterMode::Minimax, u(rng), r_min, r_max);
    cfg.gamma = u(rng);
    const double q = r_min + (r_max - r_min) * u(rng);
    const double r = 2.0 * u(rng) - 1.0;
    EXPECT_LE(minimax_reward(r, q, false, cfg) - r, 0.0);
    EXPECT_EQ(minimax_reward(r, q, true, cfg), r);
    EXPECT_TRUE(shift_bound_check(q, cfg));
  }
}

TEST(ShiftBoundCheck, Examples) {
  const auto cfg = minimax_cfg();
  EXPECT_TRUE(shift_bound_check(-1.0, cfg));
  EXPECT_TRUE(shift_bound_check(0.5, cfg));
  EXPECT_FALSE(shift_bound_check(-1.2, cfg));
}

TEST(RewardConfig, ShiftAndOverlay) {
  auto cfg = ExploiterRewardConfig::for_bounds(ExploiterMode::Minimax, 0.01, -10.0, 10.0);
  EXPECT_EQ(cfg.shift, 10.0);
  cfg.shift_from_running_min(-3.5);
  EXPECT_EQ(cfg.shift, 3.5);
  DqnConfig learner;
  apply_gamma_zero_overlay(cfg, learner);
  EXPECT_EQ(cfg.alpha, 1.0);
  EXPECT_EQ(learner.gamma, 0.0);
  EXPECT_EQ(cfg.mode, ExploiterMode::GammaZero);
  EXPECT_THROW(ExploiterRewardConfig::for_bounds(ExploiterMode::Minimax, 1.5, -1, 1), Error);
  EXPECT_EQ(parse_mode("defensive"), ExploiterMode::Defensive);
  EXPECT_THROW(parse_mode("sneaky"), Error);
}

TEST(PairTransitions, SharedOpponentStates) {
  const auto paired =
      pair_transitions(trace_of({0, 1, 2}, PlayerRole::First), trace_of({1, 3}, PlayerRole::Second));
  ASSERT_EQ(paired.size(), 3u);
  EXPECT_EQ(paired[0].pairing_timestamp, 1);
  EXPECT_EQ(paired[1].pairing_timestamp, 3);
  EXPECT_EQ(paired[2].pairing_timestamp, 3);
  EXPECT_EQ(*paired[0].opponent_state, Observation{1.0});
  EXPECT_EQ(*paired[2].opponent_state, Observation{3.0});
}

TEST(PairTransitions, TerminalPairingWhenOpponentHasNoLaterState) {
  const auto paired =
      pair_transitions(trace_of({0, 2, 4}, PlayerRole::First), trace_of({1, 3}, PlayerRole::Second));
  EXPECT_FALSE(paired[1].terminal_paired());
  EXPECT_TRUE(paired[2].terminal_paired());
  // Terminal pairing gives no shaping.
  auto cfg = minimax_cfg();
  auto last = paired;
  last[2].exploiter.done = true;
  const auto out = transform_batch(std::span(last).subspan(2), nullptr, cfg);
  EXPECT_EQ(out[0].reward, last[2].exploiter.reward);
}

TEST(PairTransitions, Errors) {
  try {
    pair_transitions(trace_of({0}, PlayerRole::First, 1), trace_of({1}, PlayerRole::Second, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EpisodeMismatch);
  }
  try {
    pair_transitions(trace_of({0, 2, 1}, PlayerRole::First), trace_of({1}, PlayerRole::Second));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnsortedTrace);
  }
}

TEST(PairTransitions, TurnBasedIsOneToOne) {
  TicTacToeEnv env;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto trace = run_episode(env, seed, seed, testing::random_policies(seed));
    for (PlayerRole r : kRoles) {
      const auto paired = pair_transitions(trace.role(r), trace.role(opponent(r)));
      ASSERT_EQ(paired.size(), trace.role(r).transitions.size());
      std::set<std::int64_t> used;
      for (const auto& p : paired) {
        EXPECT_GE(p.pairing_timestamp, p.exploiter.timestamp);
        if (p.terminal_paired()) {
          EXPECT_TRUE(p.exploiter.done);
          continue;
        }
        EXPECT_EQ(p.pairing_timestamp, p.exploiter.timestamp + 1);
        EXPECT_TRUE(used.insert(p.pairing_timestamp).second);
      }
    }
  }
}

TEST(PairTransitions, SimultaneousCountAndOrderProperties) {
  DuelSimEnv env;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto trace = run_episode(env, seed, seed, testing::random_policies(seed + 100));
    for (PlayerRole r : kRoles) {
      const auto& own = trace.role(r).transitions;
      const auto& opp = trace.role(opponent(r)).transitions;
      const auto paired = pair_transitions(trace.role(r), trace.role(opponent(r)));
      ASSERT_EQ(paired.size(), own.size());
      for (const auto& p : paired) {
        EXPECT_GE(p.pairing_timestamp, p.exploiter.timestamp + 1);
        if (p.terminal_paired()) continue;
        // Earliest opponent decision at or after the next tick.
        for (const auto& o : opp) {
          if (o.timestamp > p.exploiter.timestamp && o.timestamp < p.pairing_timestamp) {
            ADD_FAILURE() << "skipped an earlier opponent state";
          }
        }
      }
    }
  }
}

class FixedEvaluator final : public OpponentEvaluator {
 public:
  explicit FixedEvaluator(double v) : v_(v) {}
  double max_value(const Observation&, const ActionMask&) const override { return v_; }

 private:
  double v_;
};

TEST(TransformBatch, VanillaIsBitExactIdentity) {
  DuelSimEnv env;
  const auto trace = run_episode(env, 4, 4, testing::random_policies(9));
  const auto paired = pair_transitions(trace.role(PlayerRole::First), trace.role(PlayerRole::Second));
  auto cfg = minimax_cfg();
  cfg.mode = ExploiterMode::Vanilla;
  const auto out = transform_batch(paired, nullptr, cfg);
  ASSERT_EQ(out.size(), paired.size());
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], paired[i].exploiter);
}

TEST(TransformBatch, MinimaxUsesOracleValueOfOpponentState) {
  // X has just played cell 6; O to move can win at cell 5.
  TicTacToeState before;
  for (int c : {0, 1}) before.cells[c] = Cell::First;
  for (int c : {3, 4}) before.cells[c] = Cell::Second;
  before.to_move = PlayerRole::First;
  const auto after = TicTacToe::apply(before, 6);

  auto exact = std::make_shared<const Minimax<TicTacToe>>();
  ASSERT_EQ(exact->value_proxy(after, PlayerRole::Second), 1.0);
  MinimaxEvaluator<TicTacToe> evaluator(exact);

  PairedTransition p;
  p.exploiter.state = board::observe(before.cells, PlayerRole::First);
  p.exploiter.legal.assign(9, true);
  p.exploiter.action = 6;
  p.exploiter.timestamp = 4;
  p.opponent_state = board::observe(after.cells, PlayerRole::Second);
  p.opponent_legal.assign(9, true);
  p.pairing_timestamp = 5;
  BatchAudit audit;
  const auto out = transform_batch(std::span(&p, 1), &evaluator, minimax_cfg(), &audit);
  EXPECT_NEAR(out[0].reward, -0.19900, 1e-12);
  EXPECT_EQ(audit.evaluated, 1u);
  EXPECT_EQ(audit.bound_violations, 0u);
}

TEST(TransformBatch, AggressiveAndDefensive) {
  PairedTransition p;
  p.exploiter = at(3);
  p.exploiter.damage_dealt = 1;
  p.exploiter.damage_taken = 2;
  auto cfg = minimax_cfg();
  cfg.mode = ExploiterMode::Aggressive;
  EXPECT_EQ(transform_batch(std::span(&p, 1), nullptr, cfg)[0].reward, 1.0);
  cfg.mode = ExploiterMode::Defensive;
  EXPECT_EQ(transform_batch(std::span(&p, 1), nullptr, cfg)[0].reward, -2.0);
}

TEST(TransformBatch, AggressiveRewardOnASimulatedHit) {
  DuelSimEnv env;
  std::array<Policy, 2> scripted{
      [](const Observation&, const ActionMask&) { return static_cast<int>(DuelAction::Attack); },
      [](const Observation&, const ActionMask&) { return static_cast<int>(DuelAction::NoOp); }};
  const auto trace = run_episode(env, 0, 0, scripted);
  const auto paired = pair_transitions(trace.role(PlayerRole::First), trace.role(PlayerRole::Second));
  auto cfg = minimax_cfg();
  cfg.mode = ExploiterMode::Aggressive;
  const auto out = transform_batch(paired, nullptr, cfg);
  EXPECT_EQ(paired[0].exploiter.reward, 0.0);
  EXPECT_EQ(paired[0].exploiter.damage_dealt, 1);
  EXPECT_EQ(out[0].reward, 1.0);
}

TEST(TransformBatch, TerminalPairingNeverShaped) {
  Rng rng(1);
  auto cfg = minimax_cfg();
  FixedEvaluator evaluator(0.9);
  for (int i = 0; i < 200; ++i) {
    // Also when the exploiter acts again but the opponent never does.
    PairedTransition p;
    p.exploiter = at(i, std::uniform_real_distribution<double>(-1, 1)(rng), i % 2 == 0);
    EXPECT_EQ(transform_batch(std::span(&p, 1), &evaluator, cfg)[0].reward, p.exploiter.reward);
  }
}

TEST(TransformBatch, ActionAnsweredByAWinningReplyIsShaped) {
  // The exploiter's last transition ends the episode, but the opponent still
  // faced the position and valued it.
  TicTacToeEnv env;
  std::array<Policy, 2> policies{
      [](const Observation& obs, const ActionMask&) {
        const auto s = TicTacToe::decode(obs);
        for (int a : {8, 7, 6}) {
          if (TicTacToe::is_legal(s, a)) return a;
        }
        return 5;
      },
      [](const Observation& obs, const ActionMask&) {
        const auto s = TicTacToe::decode(obs);
        for (int a : {0, 1, 2}) {
          if (TicTacToe::is_legal(s, a)) return a;
        }
        return 3;
      }};
  // X: 8, 7, 6 completes the bottom row first, so play O as the exploiter
  // and let X's third move win.
  const auto trace = run_episode(env, 0, 0, policies);
  ASSERT_EQ(trace.final_outcome, GameOutcome::FirstWins);
  const auto paired = pair_transitions(trace.role(PlayerRole::Second), trace.role(PlayerRole::First));
  const auto& last = paired.back();
  ASSERT_TRUE(last.exploiter.done);
  ASSERT_FALSE(last.terminal_paired());
  auto exact = std::make_shared<const Minimax<TicTacToe>>();
  MinimaxEvaluator<TicTacToe> evaluator(exact);
  const auto out = transform_batch(paired, &evaluator, minimax_cfg());
  EXPECT_NEAR(out.back().reward, -1.0 - 0.1 * 0.995 * (1.0 + 1.0), 1e-12);
}

TEST(TransformBatch, MissingPairingRejected) {
  PairedTransition p;
  p.exploiter = at(2);
  p.opponent_state = Observation{0.0};
  p.pairing_timestamp = 1;
  FixedEvaluator evaluator(0.0);
  try {
    transform_batch(std::span(&p, 1), &evaluator, minimax_cfg());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingPairing);
  }
}

TEST(TransformBatch, AuditCountsApproximationErrors) {
  std::vector<PairedTransition> batch(3);
  for (int i = 0; i < 3; ++i) {
    batch[i].exploiter = at(i);
    batch[i].opponent_state = Observation{0.0};
    batch[i].pairing_timestamp = i + 1;
  }
  FixedEvaluator evaluator(-1.2);
  BatchAudit audit;
  transform_batch(batch, &evaluator, minimax_cfg(), &audit);
  EXPECT_EQ(audit.bound_violations, 3u);
  std::ostringstream csv;
  AuditLog log(csv);
  log.write(audit);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')),
            "batch,transitions,violations,mean_shaped_reward,mean_opp_max_q");
}

TEST(QNetworkEvaluator, MaskedMaxOfFrozenModel) {
  ParameterSet p{MlpSpec{1, {}, 3}, {0, 0, 0, 0.4, 0.9, -0.1}};
  auto model = std::make_shared<const Agent>(Agent(p, p, DqnConfig{}).checkpoint());
  QNetworkEvaluator evaluator(model);
  EXPECT_EQ(evaluator.max_value({0.0}, {true, true, true}), 0.9);
  EXPECT_EQ(evaluator.max_value({0.0}, {true, false, true}), 0.4);
}

// With exact play on both sides, the exploiter's action value is the
// immediate reward minus the opponent's value of the resulting position.
TEST(OpponentValueIdentity, HoldsOnEveryTicTacToeDecision) {
  Minimax<TicTacToe> exact;
  std::map<std::uint32_t, int> memo;
  std::function<int(const TicTacToeState&)> value = [&](const TicTacToeState& s) {
    if (auto it = memo.find(TicTacToe::key(s)); it != memo.end()) return it->second;
    int v;
    const auto o = TicTacToe::outcome(s);
    if (o != GameOutcome::Ongoing) {
      v = static_cast<int>(utility(o, s.to_move));
    } else {
      v = -2;
      for (int a = 0; a < 9; ++a) {
        if (TicTacToe::is_legal(s, a)) v = std::max(v, -value(TicTacToe::apply(s, a)));
      }
    }
    return memo[TicTacToe::key(s)] = v;
  };

  std::set<std::uint32_t> seen;
  std::size_t checked = 0;
  std::function<void(const TicTacToeState&)> visit = [&](const TicTacToeState& s) {
    if (!seen.insert(TicTacToe::key(s)).second) return;
    if (TicTacToe::outcome(s) != GameOutcome::Ongoing) return;
    const auto me = s.to_move;
    for (int a = 0; a < 9; ++a) {
      if (!TicTacToe::is_legal(s, a)) continue;
      const auto child = TicTacToe::apply(s, a);
      const double q = -value(child);  // exploiter's exact action value
      const auto o = TicTacToe::outcome(child);
      const double r = o == GameOutcome::Ongoing ? 0.0 : utility(o, me);
      const double v_opp =
          o == GameOutcome::Ongoing ? exact.value_proxy(child, opponent(me)) : 0.0;
      EXPECT_EQ(q, r - v_opp);
      ++checked;
      visit(child);
    }
  };
  visit(TicTacToe::initial());
  EXPECT_GT(checked, 10000u);
}

}  // namespace
}  // namespace mmx
