#include <functional>
#include <set>
#include <unordered_set>

#include <gtest/gtest.h>

#include "mmx/games/registry.hpp"
#include "test_util.hpp"

namespace mmx {
namespace {

template <class F>
Errc error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an mmx::Error";
  return Errc::Io;
}

int count_true(const ActionMask& m) {
  int n = 0;
  for (bool b : m) n += b;
  return n;
}

// --- reset ----------------------------------------------------------------

TEST(Reset, TicTacToeStartsEmptyWithFirstToMove) {
  TicTacToeEnv env;
  const auto out = env.reset(7);
  EXPECT_FALSE(out.done);
  EXPECT_TRUE(out.owns(PlayerRole::First));
  EXPECT_FALSE(out.owns(PlayerRole::Second));
  EXPECT_EQ(env.state(), TicTacToeState{});
  ASSERT_EQ(out.observation[0].size(), 27u);
  for (int i = 0; i < 9; ++i) EXPECT_EQ(out.observation[0][i], 1.0);  // empty plane
}

TEST(Reset, Connect4StartsEmptyWithFirstToMove) {
  Connect4Env env;
  for (std::uint64_t seed : {0u, 5u, 123u}) {
    const auto out = env.reset(seed);
    EXPECT_EQ(env.state(), Connect4State{});
    EXPECT_TRUE(out.owns(PlayerRole::First));
    EXPECT_EQ(out.observation[1].size(), 126u);
  }
}

TEST(Reset, DuelSimBothFightersFreshAndActing) {
  DuelSimEnv env;
  const auto out = env.reset(3);
  EXPECT_EQ(env.state().health[0], 10);
  EXPECT_EQ(env.state().health[1], 10);
  EXPECT_TRUE(out.owns(PlayerRole::First));
  EXPECT_TRUE(out.owns(PlayerRole::Second));
  EXPECT_FALSE(out.done);
}

// --- step -----------------------------------------------------------------

TEST(Step, TicTacToeCenterIsNonTerminal) {
  TicTacToeEnv env;
  env.reset(0);
  const auto out = env.step({4, std::nullopt});
  EXPECT_EQ(out.reward[0], 0.0);
  EXPECT_EQ(out.reward[1], 0.0);
  EXPECT_FALSE(out.done);
  EXPECT_EQ(out.timestamp, 1);
  EXPECT_TRUE(out.owns(PlayerRole::Second));
}

TEST(Step, TicTacToeCompletingALineWins) {
  TicTacToeEnv env;
  env.reset(0);
  for (int a : {0, 3, 1, 4}) {
    const auto mover = env.state().to_move;
    JointAction j;
    j[index(mover)] = a;
    env.step(j);
  }
  const auto out = env.step({2, std::nullopt});
  EXPECT_TRUE(out.done);
  EXPECT_EQ(out.reward[0], 1.0);
  EXPECT_EQ(out.reward[1], -1.0);
  EXPECT_EQ(out.outcome, GameOutcome::FirstWins);
  EXPECT_FALSE(out.owns(PlayerRole::First));
  EXPECT_FALSE(out.owns(PlayerRole::Second));
}

TEST(Step, Connect4FullColumnIsIllegal) {
  Connect4Env env;
  env.reset(0);
  for (int i = 0; i < 6; ++i) {
    JointAction j;
    j[index(env.state().to_move)] = 0;
    env.step(j);
  }
  EXPECT_EQ(error_of([&] { env.step({0, std::nullopt}); }), Errc::IllegalAction);
}

TEST(Step, ContractViolations) {
  TicTacToeEnv env;
  env.reset(0);
  EXPECT_EQ(error_of([&] { env.step({std::nullopt, std::nullopt}); }), Errc::MissingAction);
  EXPECT_EQ(error_of([&] { env.step({std::nullopt, 3}); }), Errc::NotYourTurn);
  EXPECT_EQ(error_of([&] { env.step({9, std::nullopt}); }), Errc::IllegalAction);
  EXPECT_EQ(error_of([&] { env.legal_actions(PlayerRole::Second); }), Errc::NotYourTurn);

  DuelSimEnv duel;
  duel.reset(0);
  EXPECT_EQ(error_of([&] { duel.step({0, std::nullopt}); }), Errc::MissingAction);
  EXPECT_EQ(error_of([&] { duel.step({0, 7}); }), Errc::IllegalAction);
}

// --- legal_actions ----------------------------------------------------------

TEST(LegalActions, TicTacToeCounts) {
  TicTacToeEnv env;
  env.reset(0);
  EXPECT_EQ(count_true(env.legal_actions(PlayerRole::First)), 9);
  env.step({0, std::nullopt});
  env.step({std::nullopt, 4});
  env.step({8, std::nullopt});
  EXPECT_EQ(count_true(env.legal_actions(PlayerRole::Second)), 6);
}

TEST(LegalActions, Connect4OneFullColumn) {
  Connect4Env env;
  env.reset(0);
  for (int i = 0; i < 6; ++i) {
    JointAction j;
    j[index(env.state().to_move)] = 3;
    env.step(j);
  }
  const auto mask = env.legal_actions(env.state().to_move);
  EXPECT_EQ(count_true(mask), 6);
  EXPECT_FALSE(mask[3]);
}

// --- tictactoe_outcome -----------------------------------------------------

TicTacToeState ttt(const std::string& board) {
  TicTacToeState s;
  for (int i = 0; i < 9; ++i) {
    s.cells[i] = board[i] == 'X' ? Cell::First : (board[i] == 'O' ? Cell::Second : Cell::Empty);
  }
  const auto [x, o] = board::counts(s.cells);
  s.to_move = x == o ? PlayerRole::First : PlayerRole::Second;
  return s;
}

TEST(TicTacToeOutcome, Examples) {
  EXPECT_EQ(tictactoe_outcome(ttt("XXXOO....")), GameOutcome::FirstWins);
  EXPECT_EQ(tictactoe_outcome(ttt("XOXXOOOXX")), GameOutcome::Draw);
  EXPECT_EQ(tictactoe_outcome(ttt(".........")), GameOutcome::Ongoing);
  EXPECT_EQ(tictactoe_outcome(ttt("XX.OOOX..")), GameOutcome::SecondWins);
}

TEST(TicTacToeOutcome, InvalidStates) {
  EXPECT_EQ(error_of([] { tictactoe_outcome(ttt("XXX......")); }), Errc::InvalidState);
  EXPECT_EQ(error_of([] { tictactoe_outcome(ttt("XXXOOO...")); }), Errc::InvalidState);
  auto s = ttt("X........");
  s.to_move = PlayerRole::First;
  EXPECT_EQ(error_of([&] { tictactoe_outcome(s); }), Errc::InvalidState);
}

TEST(TicTacToe, ReachableStatesEnumerate) {
  // Exhaustive enumeration oracle: every reachable position is visited once.
  std::unordered_set<std::uint32_t> seen;
  std::function<void(const TicTacToeState&)> visit = [&](const TicTacToeState& s) {
    if (!seen.insert(TicTacToe::key(s)).second) return;
    const auto o = tictactoe_outcome(s);  // throws on any invariant violation
    const auto [x, n_o] = board::counts(s.cells);
    ASSERT_TRUE(x - n_o == 0 || x - n_o == 1);
    if (o != GameOutcome::Ongoing) return;
    for (int a = 0; a < 9; ++a) {
      if (TicTacToe::is_legal(s, a)) visit(TicTacToe::apply(s, a));
    }
  };
  visit(TicTacToe::initial());
  EXPECT_LE(seen.size(), 5478u);
  EXPECT_EQ(seen.size(), 5478u);
}

// --- connect4_outcome ------------------------------------------------------

TEST(Connect4Outcome, VerticalFour) {
  Connect4State s;
  for (int r = 0; r < 4; ++r) s.grid[r * 7 + 3] = Cell::First;
  for (int r = 0; r < 3; ++r) s.grid[r * 7 + 0] = Cell::Second;
  s.to_move = PlayerRole::Second;
  EXPECT_EQ(connect4_outcome(s), GameOutcome::FirstWins);
}

TEST(Connect4Outcome, EmptyIsOngoing) {
  EXPECT_EQ(connect4_outcome(Connect4State{}), GameOutcome::Ongoing);
}

TEST(Connect4Outcome, FloatingPieceIsInvalid) {
  Connect4State s;
  s.grid[1 * 7 + 2] = Cell::First;
  s.to_move = PlayerRole::Second;
  EXPECT_EQ(error_of([&] { connect4_outcome(s); }), Errc::InvalidState);
}

// Brute-force search for a full 21/21 grid with no four in a row, using its
// own line test.
bool has_four_ending_at(const std::array<Cell, 42>& g, int idx) {
  const int r = idx / 7;
  const int c = idx % 7;
  const int dirs[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
  for (const auto& d : dirs) {
    for (int start = -3; start <= 0; ++start) {
      bool full = true;
      for (int k = 0; k < 4 && full; ++k) {
        const int rr = r + (start + k) * d[0];
        const int cc = c + (start + k) * d[1];
        if (rr < 0 || rr >= 6 || cc < 0 || cc >= 7 || g[rr * 7 + cc] != g[idx]) full = false;
      }
      if (full) return true;
    }
  }
  return false;
}

bool fill_line_free(std::array<Cell, 42>& g, int idx, int p1, int p2) {
  if (idx == 42) return true;
  for (Cell c : {Cell::First, Cell::Second}) {
    if ((c == Cell::First ? p1 : p2) == 21) continue;
    g[idx] = c;
    if (!has_four_ending_at(g, idx) &&
        fill_line_free(g, idx + 1, p1 + (c == Cell::First), p2 + (c == Cell::Second))) {
      return true;
    }
    g[idx] = Cell::Empty;
  }
  return false;
}

TEST(Connect4Outcome, FullLineFreeGridIsDraw) {
  Connect4State s;
  ASSERT_TRUE(fill_line_free(s.grid, 0, 0, 0));
  s.to_move = PlayerRole::First;
  EXPECT_EQ(connect4_outcome(s), GameOutcome::Draw);
}

TEST(Connect4, EpisodesEndWithin42Plies) {
  Connect4Env env;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto trace = run_episode(env, seed, seed, testing::random_policies(seed));
    EXPECT_LE(trace.step_rewards.size(), 42u);
  }
}

// --- duel_step -------------------------------------------------------------

constexpr int kAttack = static_cast<int>(DuelAction::Attack);
constexpr int kBlock = static_cast<int>(DuelAction::Block);
constexpr int kRecover = static_cast<int>(DuelAction::Recover);
constexpr int kNoOp = static_cast<int>(DuelAction::NoOp);

TEST(DuelStep, CleanHitDamagesAndStuns) {
  const auto [next, out] = duel_step(DuelState{}, {kAttack, kNoOp});
  EXPECT_EQ(next.health[1], 9);
  EXPECT_EQ(next.stun_ticks[1], 2);
  EXPECT_EQ(out.reward[0], 0.0);
  EXPECT_EQ(out.reward[1], 0.0);
  EXPECT_TRUE(out.owns(PlayerRole::First));
  EXPECT_FALSE(out.owns(PlayerRole::Second));
  EXPECT_EQ(out.damage_taken[1], 1);
}

TEST(DuelStep, BlockNegatesAttack) {
  const auto [next, out] = duel_step(DuelState{}, {kAttack, kBlock});
  EXPECT_EQ(next.health[0], 10);
  EXPECT_EQ(next.health[1], 10);
  EXPECT_EQ(out.reward[0], 0.0);
  EXPECT_EQ(out.reward[1], 0.0);
}

TEST(DuelStep, LethalHitEndsDuel) {
  DuelState s;
  s.health[1] = 1;
  const auto [next, out] = duel_step(s, {kAttack, kNoOp});
  EXPECT_EQ(next.health[1], 0);
  EXPECT_TRUE(out.done);
  EXPECT_EQ(out.reward[0], 10.0);
  EXPECT_EQ(out.reward[1], -10.0);
  EXPECT_FALSE(out.owns(PlayerRole::First));
}

TEST(DuelStep, RecoverStaggersABlocker) {
  const auto [next, out] = duel_step(DuelState{}, {kRecover, kBlock});
  EXPECT_EQ(next.stun_ticks[1], 1);
  EXPECT_EQ(next.health[1], 10);
}

TEST(DuelStep, StunnedFighterSitsOutAndComboDoesNotRefreshStun) {
  auto [s1, o1] = duel_step(DuelState{}, {kAttack, kRecover});
  ASSERT_EQ(s1.stun_ticks[1], 2);
  EXPECT_EQ(error_of([&] { duel_step(s1, {kAttack, kBlock}); }), Errc::NotYourTurn);
  auto [s2, o2] = duel_step(s1, {kAttack, std::nullopt});
  EXPECT_EQ(s2.health[1], 8);
  EXPECT_EQ(s2.stun_ticks[1], 1);
  auto [s3, o3] = duel_step(s2, {kAttack, std::nullopt});
  EXPECT_EQ(s3.health[1], 7);
  EXPECT_EQ(s3.stun_ticks[1], 0);
  EXPECT_TRUE(o3.owns(PlayerRole::Second));
}

TEST(DuelSim, HealthNeverIncreasesAndTimeoutIsADraw) {
  DuelSimEnv env;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    env.reset(seed);
    auto policies = testing::random_policies(seed);
    StepOutcome out = env.reset(seed);
    auto prev = env.state();
    while (!out.done) {
      JointAction j;
      for (PlayerRole r : kRoles) {
        if (out.owns(r)) j[index(r)] = policies[index(r)]({}, env.legal_actions(r));
        EXPECT_EQ(out.owns(r), !env.state().stunned(r));
      }
      out = env.step(j);
      EXPECT_LE(env.state().health[0], prev.health[0]);
      EXPECT_LE(env.state().health[1], prev.health[1]);
      EXPECT_EQ(env.state().tick, prev.tick + 1);
      prev = env.state();
    }
    EXPECT_LE(env.state().tick, DuelState::kMaxTicks);
  }
  // Two fighters that only block never finish.
  DuelState s;
  StepOutcome out;
  while (!s.terminal()) std::tie(s, out) = duel_step(s, {kBlock, kBlock});
  EXPECT_EQ(out.outcome, GameOutcome::Draw);
  EXPECT_EQ(out.reward[0], 0.0);
}

TEST(DuelSim, StunsMakeDecisionCountsDiffer) {
  DuelSimEnv env;
  int asymmetric = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto trace = run_episode(env, seed, seed, testing::random_policies(seed));
    asymmetric += trace.role(PlayerRole::First).transitions.size() !=
                  trace.role(PlayerRole::Second).transitions.size();
  }
  EXPECT_GT(asymmetric, 0);
}

// --- shared invariants -------------------------------------------------------

TEST(AllGames, ZeroSumAndOwnershipInvariants) {
  for (auto id : kEnvironmentIds) {
    auto env = make_environment(id);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      auto policies = testing::random_policies(seed * 31 + 1);
      StepOutcome out = env->reset(seed);
      std::int64_t last = out.timestamp;
      while (!out.done) {
        JointAction j;
        bool anyone = false;
        for (PlayerRole r : kRoles) {
          if (!out.owns(r)) continue;
          anyone = true;
          const auto mask = env->legal_actions(r);
          EXPECT_TRUE(any_legal(mask));
          j[index(r)] = policies[index(r)](out.observation[index(r)], mask);
        }
        EXPECT_TRUE(anyone) << id;
        out = env->step(j);
        EXPECT_EQ(out.reward[0], -out.reward[1]);
        EXPECT_EQ(out.timestamp, last + 1);
        last = out.timestamp;
      }
      EXPECT_FALSE(out.owns(PlayerRole::First));
      EXPECT_FALSE(out.owns(PlayerRole::Second));
    }
  }
}

TEST(Registry, UnknownIdRejected) {
  EXPECT_EQ(error_of([] { make_environment("chess"); }), Errc::EnvironmentUnknown);
  EXPECT_EQ(make_environment("connect4")->id(), "connect4");
}

}  // namespace
}  // namespace mmx
