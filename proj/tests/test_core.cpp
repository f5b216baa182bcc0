#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "mmx/core.hpp"
#include "mmx/games/registry.hpp"
#include "test_util.hpp"

namespace mmx {
namespace {

EpisodeTrace sparse_win_trace() {
  EpisodeTrace t;
  t.step_rewards.assign(6, {0.0, 0.0});
  t.step_rewards[5] = {1.0, -1.0};
  t.final_outcome = GameOutcome::FirstWins;
  t.complete = true;
  return t;
}

TEST(PlayerRole, OpponentIsAnInvolution) {
  for (PlayerRole r : kRoles) {
    EXPECT_NE(opponent(r), r);
    EXPECT_EQ(opponent(opponent(r)), r);
  }
  EXPECT_EQ(opponent(PlayerRole::First), PlayerRole::Second);
}

TEST(Returns, UndiscountedSparseWin) {
  const auto t = sparse_win_trace();
  EXPECT_EQ(returns(t, PlayerRole::First, 1.0), 1.0);
  EXPECT_EQ(returns(t, PlayerRole::Second, 1.0), -1.0);
}

TEST(Returns, DiscountedSparseWin) {
  const auto t = sparse_win_trace();
  EXPECT_NEAR(returns(t, PlayerRole::First, 0.995), std::pow(0.995, 5), 1e-15);
  EXPECT_NEAR(returns(t, PlayerRole::First, 0.995), 0.97525, 1e-5);
}

TEST(Returns, IncompleteTraceRejected) {
  auto t = sparse_win_trace();
  t.complete = false;
  try {
    returns(t, PlayerRole::First, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IncompleteTrace);
  }
}

TEST(Returns, AntisymmetricOnRandomRollouts) {
  for (auto id : kEnvironmentIds) {
    auto env = make_environment(id);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const auto trace = run_episode(*env, seed, seed, testing::random_policies(seed));
      for (double gamma : {0.0, 0.5, 0.995, 1.0}) {
        EXPECT_NEAR(returns(trace, PlayerRole::First, gamma),
                    -returns(trace, PlayerRole::Second, gamma), 1e-12);
      }
    }
  }
}

TEST(RunEpisode, DeterministicForSeedAndActions) {
  for (auto id : kEnvironmentIds) {
    auto env = make_environment(id);
    const auto a = run_episode(*env, 11, 1, testing::random_policies(99));
    const auto b = run_episode(*env, 11, 1, testing::random_policies(99));
    for (PlayerRole r : kRoles) {
      EXPECT_EQ(a.role(r).transitions, b.role(r).transitions) << id;
    }
    EXPECT_EQ(a.step_rewards, b.step_rewards);
    EXPECT_EQ(a.final_outcome, b.final_outcome);
  }
}

TEST(RunEpisode, TracesAreSortedAndEndDone) {
  for (auto id : kEnvironmentIds) {
    auto env = make_environment(id);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto trace = run_episode(*env, seed, seed, testing::random_policies(seed + 7));
      for (PlayerRole r : kRoles) {
        const auto& ts = trace.role(r).transitions;
        ASSERT_FALSE(ts.empty());
        for (std::size_t i = 1; i < ts.size(); ++i) {
          EXPECT_LT(ts[i - 1].timestamp, ts[i].timestamp);
          EXPECT_FALSE(ts[i - 1].done);
        }
        EXPECT_TRUE(ts.back().done);
        for (const auto& t : ts) EXPECT_TRUE(t.legal[t.action]);
      }
      // Final rewards agree with the recorded outcome.
      const double scale = env->reward_scale();
      for (PlayerRole r : kRoles) {
        EXPECT_EQ(trace.step_rewards.back()[index(r)], scale * utility(trace.final_outcome, r));
      }
    }
  }
}

TEST(TraceFile, RoundTripsTransitions) {
  auto env = make_environment("duelsim");
  const auto trace = run_episode(*env, 3, 42, testing::random_policies(5));
  std::stringstream file;
  write_trace(file, trace);
  const auto back = read_traces(file);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].episode_id, 42u);
  for (PlayerRole r : kRoles) {
    const auto& orig = trace.role(r).transitions;
    const auto& read = back[0].role(r).transitions;
    ASSERT_EQ(orig.size(), read.size());
    for (std::size_t i = 0; i < orig.size(); ++i) {
      EXPECT_EQ(orig[i].state, read[i].state);
      EXPECT_EQ(orig[i].next_state, read[i].next_state);
      EXPECT_EQ(orig[i].action, read[i].action);
      EXPECT_EQ(orig[i].reward, read[i].reward);
      EXPECT_EQ(orig[i].timestamp, read[i].timestamp);
      EXPECT_EQ(orig[i].done, read[i].done);
    }
  }
}

TEST(TraceFile, MalformedLineIsAnIoError) {
  std::stringstream file("{not json\n");
  try {
    read_traces(file);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Io);
  }
}

}  // namespace
}  // namespace mmx
