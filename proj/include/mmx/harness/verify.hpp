#pragma once

// Invariant and oracle suites, sized for acceptance. Each check builds its
// own reference (exhaustive negamax, value iteration, finite differences,
// chi-squared) rather than trusting the code under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "mmx/core.hpp"
#include "mmx/dqn.hpp"
#include "mmx/exploiter.hpp"
#include "mmx/games/registry.hpp"
#include "mmx/harness/tournament.hpp"
#include "mmx/league.hpp"
#include "mmx/minimax.hpp"
#include "mmx/neural.hpp"

namespace mmx::verify {

struct CheckResult {
  int criterion = 0;
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline Policy uniform_policy(std::shared_ptr<Rng> rng) {
  return [rng](const Observation&, const ActionMask& mask) {
    std::vector<int> legal;
    for (std::size_t a = 0; a < mask.size(); ++a) {
      if (mask[a]) legal.push_back(static_cast<int>(a));
    }
    return legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(*rng)];
  };
}

inline std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

}  // namespace detail

/// Q^i(s,a) = r - V^j(s') on every reachable TicTacToe decision, with Q^i
/// from an independent negamax and V^j from the minimax oracle.
inline CheckResult opponent_value_identity() {
  Minimax<TicTacToe> exact;
  std::map<std::uint32_t, double> memo;
  std::function<double(const TicTacToeState&)> negamax = [&](const TicTacToeState& s) {
    if (auto it = memo.find(TicTacToe::key(s)); it != memo.end()) return it->second;
    double v = -2.0;
    const auto o = TicTacToe::outcome(s);
    if (o != GameOutcome::Ongoing) {
      v = utility(o, s.to_move);
    } else {
      for (int a = 0; a < TicTacToe::kNumActions; ++a) {
        if (TicTacToe::is_legal(s, a)) v = std::max(v, -negamax(TicTacToe::apply(s, a)));
      }
    }
    return memo[TicTacToe::key(s)] = v;
  };
  std::set<std::uint32_t> seen;
  std::size_t checked = 0;
  double worst = 0.0;
  std::function<void(const TicTacToeState&)> visit = [&](const TicTacToeState& s) {
    if (!seen.insert(TicTacToe::key(s)).second || TicTacToe::outcome(s) != GameOutcome::Ongoing) {
      return;
    }
    const auto me = s.to_move;
    for (int a = 0; a < TicTacToe::kNumActions; ++a) {
      if (!TicTacToe::is_legal(s, a)) continue;
      const auto child = TicTacToe::apply(s, a);
      const auto o = TicTacToe::outcome(child);
      const double r = o == GameOutcome::Ongoing ? 0.0 : utility(o, me);
      const double v_opp = o == GameOutcome::Ongoing ? exact.value_proxy(child, opponent(me)) : 0.0;
      worst = std::max(worst, std::abs(-negamax(child) - (r - v_opp)));
      ++checked;
      visit(child);
    }
  };
  visit(TicTacToe::initial());
  return {4, "opponent-value identity", worst <= 1e-12,
          std::to_string(checked) + " pairs, max error " + detail::fmt(worst)};
}

/// The shaped addition is <= 0 when d = 0 and exactly 0 when d = 1.
inline CheckResult shaping_sign(std::size_t tuples = 100000, std::uint64_t seed = 5) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t failures = 0;
  for (std::size_t i = 0; i < tuples; ++i) {
    const double scale = std::array{1.0, 10.0, 100.0}[i % 3];
    auto cfg = ExploiterRewardConfig::for_bounds(ExploiterMode::Minimax, unit(rng), -scale, scale);
    cfg.gamma = unit(rng);
    const double q = -scale + 2.0 * scale * unit(rng);
    const double r = -scale + 2.0 * scale * unit(rng);
    const bool done = unit(rng) < 0.5;
    const double added = minimax_reward(r, q, done, cfg) - r;
    if (done ? added != 0.0 : added > 0.0) ++failures;
  }
  return {5, "shaping non-positivity", failures == 0,
          std::to_string(tuples) + " tuples, " + std::to_string(failures) + " violations"};
}

/// Per-step reward antisymmetry and G^i = -G^j on random rollouts of every
/// environment.
inline CheckResult zero_sum(int rollouts = 10000, std::uint64_t seed = 6) {
  std::size_t violations = 0;
  for (int i = 0; i < rollouts; ++i) {
    const auto id = kEnvironmentIds[static_cast<std::size_t>(i) % kEnvironmentIds.size()];
    auto env = make_environment(id);
    auto rng = std::make_shared<Rng>(seed * 100003u + static_cast<std::uint64_t>(i));
    const auto trace = run_episode(*env, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(i),
                                   {detail::uniform_policy(rng), detail::uniform_policy(rng)});
    for (const auto& r : trace.step_rewards) violations += std::abs(r[0] + r[1]) > 1e-12;
    for (double discount : {1.0, 0.99}) {
      violations += std::abs(returns(trace, PlayerRole::First, discount) +
                             returns(trace, PlayerRole::Second, discount)) > 1e-12;
    }
  }
  return {6, "zero-sum rollouts", violations == 0,
          std::to_string(rollouts) + " rollouts, " + std::to_string(violations) + " violations"};
}

/// Central finite differences of the mean squared TD error against the
/// analytic gradient, norm-wise relative error.
inline double gradient_error(std::uint64_t seed) {
  Rng rng(seed);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const int in = pick(2, 8);
  const int out = pick(2, 5);
  auto p = init_parameters({in, {pick(3, 10), pick(3, 10)}, out}, rng);
  for (const auto& l : layout(p.spec)) {
    for (int i = 0; i < l.out; ++i) {
      p.values[l.bias + i] = std::uniform_real_distribution<double>(-0.1, 0.1)(rng);
    }
  }
  std::vector<std::vector<double>> states(6, std::vector<double>(in));
  std::vector<TdSample> batch;
  for (auto& s : states) {
    for (auto& v : s) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    batch.push_back({s, pick(0, out - 1), std::uniform_real_distribution<double>(-1, 1)(rng)});
  }
  const auto analytic = backward(p, batch).gradient;
  auto loss = [&] {
    double total = 0.0;
    for (const auto& b : batch) {
      const double e = forward(p, b.state)[b.action] - b.target;
      total += e * e;
    }
    return total / static_cast<double>(batch.size());
  };
  const double h = 1e-5;
  double diff = 0.0, norm_a = 0.0, norm_n = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const double saved = p.values[i];
    p.values[i] = saved + h;
    const double up = loss();
    p.values[i] = saved - h;
    const double down = loss();
    p.values[i] = saved;
    const double numeric = (up - down) / (2 * h);
    diff += (numeric - analytic[i]) * (numeric - analytic[i]);
    norm_a += analytic[i] * analytic[i];
    norm_n += numeric * numeric;
  }
  return std::sqrt(diff) / std::max({std::sqrt(norm_a), std::sqrt(norm_n), 1e-12});
}

inline CheckResult gradients(int instances = 20) {
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) worst = std::max(worst, gradient_error(static_cast<std::uint64_t>(i)));
  return {7, "finite-difference gradients", worst <= 1e-4,
          std::to_string(instances) + " instances, max relative error " + detail::fmt(worst)};
}

/// Double DQN on a deterministic 4-state corridor against value iteration.
inline CheckResult chain_mdp() {
  constexpr int kStates = 4;
  // Left from state 0 takes a small exit, right from state 3 the big one.
  const int next[kStates][2] = {{-1, 1}, {0, 2}, {1, 3}, {2, -1}};
  const double reward[kStates][2] = {{0.85, 0}, {0, 0}, {0, 0}, {0, 1.0}};
  const double gamma = 0.9;
  double q[kStates][2] = {};
  for (int it = 0; it < 2000; ++it) {
    double nq[kStates][2];
    for (int s = 0; s < kStates; ++s) {
      for (int a = 0; a < 2; ++a) {
        const int n = next[s][a];
        nq[s][a] = reward[s][a] + (n < 0 ? 0.0 : gamma * std::max(q[n][0], q[n][1]));
      }
    }
    std::copy(&nq[0][0], &nq[0][0] + 2 * kStates, &q[0][0]);
  }

  auto one_hot = [](int i) {
    Observation o(kStates, 0.0);
    o[i] = 1.0;
    return o;
  };
  DqnConfig cfg;
  cfg.gamma = gamma;
  cfg.learn_start = 1;
  cfg.batch_size = 16;
  cfg.target_sync_period = 20;
  cfg.learning_rate = 0.01;
  Rng rng(5);
  Agent agent(MlpSpec{kStates, {}, 2}, cfg, rng);
  ReplayBuffer buffer(100);
  for (int s = 0; s < kStates; ++s) {
    for (int a = 0; a < 2; ++a) {
      Transition t;
      t.state = one_hot(s);
      t.legal = {true, true};
      t.action = a;
      t.reward = reward[s][a];
      t.done = next[s][a] < 0;
      t.next_state = one_hot(std::max(next[s][a], 0));
      t.next_legal = {!t.done, !t.done};
      buffer.push(std::move(t));
    }
  }
  for (int i = 0; i < 6000; ++i) agent.learn_step(buffer, rng);

  bool policy_ok = true;
  double worst = 0.0;
  for (int s = 0; s < kStates; ++s) {
    const int optimal = q[s][1] > q[s][0] ? 1 : 0;
    policy_ok &= agent.greedy_action(one_hot(s), {true, true}) == optimal;
    const auto learned = agent.q_values(one_hot(s));
    for (int a = 0; a < 2; ++a) worst = std::max(worst, std::abs(learned[a] - q[s][a]));
  }
  return {8, "4-state chain vs value iteration", policy_ok && worst <= 0.05,
          std::string(policy_ok ? "optimal" : "suboptimal") + " greedy policy, max |Q error| " +
              detail::fmt(worst)};
}

/// A fighter survived a stun if its decision ticks have a gap.
inline bool has_stun(const RoleTrace& t) {
  for (std::size_t i = 1; i < t.transitions.size(); ++i) {
    if (t.transitions[i].timestamp > t.transitions[i - 1].timestamp + 1) return true;
  }
  return false;
}

/// Pairing on DuelSim episodes with at least one stun: output length always
/// equals the exploiter trace, and each episode reuses an opponent state.
inline CheckResult pairing(int episodes = 1000, std::uint64_t seed = 9) {
  DuelSimEnv env;
  auto rng = std::make_shared<Rng>(seed);
  int found = 0, reused = 0, length_errors = 0;
  for (std::uint64_t id = 0; found < episodes; ++id) {
    const auto trace = run_episode(env, id, id, {detail::uniform_policy(rng), detail::uniform_policy(rng)});
    if (!has_stun(trace.role(PlayerRole::First)) && !has_stun(trace.role(PlayerRole::Second))) continue;
    ++found;
    bool any_reuse = false;
    for (PlayerRole r : kRoles) {
      const auto paired = pair_transitions(trace.role(r), trace.role(opponent(r)));
      length_errors += paired.size() != trace.role(r).transitions.size();
      std::set<std::int64_t> used;
      for (const auto& p : paired) {
        if (!p.terminal_paired() && !used.insert(p.pairing_timestamp).second) any_reuse = true;
      }
    }
    reused += any_reuse;
  }
  return {9, "non-unique pairing", reused == episodes && length_errors == 0,
          std::to_string(reused) + "/" + std::to_string(episodes) +
              " stun episodes reuse an opponent state, " + std::to_string(length_errors) +
              " length mismatches"};
}

/// Chi-squared goodness of fit of sample_opponent to the mixture.
inline double matchmaking_p_value(const std::vector<double>& win_rates, std::size_t draws, Rng& rng) {
  OpponentPool pool;
  for (std::size_t i = 0; i < win_rates.size(); ++i) {
    pool.add({"opponent-" + std::to_string(i), Archetype::Scripted, nullptr, win_rates[i], 0});
  }
  const double total = std::accumulate(win_rates.begin(), win_rates.end(), 0.0);
  const double n = static_cast<double>(win_rates.size());
  std::vector<double> counts(win_rates.size(), 0.0);
  for (std::size_t i = 0; i < draws; ++i) counts[sample_opponent(pool, rng)] += 1.0;
  double chi2 = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double p = total > 0.0 ? 0.9 * win_rates[i] / total + 0.1 / n : 1.0 / n;
    const double expected = p * static_cast<double>(draws);
    chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
  }
  const boost::math::chi_squared dist(n - 1.0);
  return boost::math::cdf(boost::math::complement(dist, chi2));
}

inline CheckResult matchmaking(std::size_t draws = 100000, std::uint64_t seed = 10) {
  const std::vector<std::vector<double>> pools{
      {0.8, 0.2, 0.0}, {0.5, 0.5, 0.5, 0.5}, {0.9, 0.1, 0.3, 0.6, 0.05}};
  Rng rng(seed);
  double lowest = 1.0;
  for (const auto& pool : pools) lowest = std::min(lowest, matchmaking_p_value(pool, draws, rng));
  return {10, "matchmaking distribution", lowest > 0.01,
          "3 pools x " + std::to_string(draws) + " draws, lowest p " + detail::fmt(lowest)};
}

/// Four Connect4 fixture checkpoints, written to and restored from disk.
inline std::vector<TournamentEntry> fixture_checkpoints(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  Connect4Env env;
  std::vector<TournamentEntry> out;
  for (int i = 0; i < 4; ++i) {
    Rng rng(static_cast<std::uint64_t>(1000 + i));
    const Agent agent(MlpSpec{env.observation_size(), {64, 64}, env.num_actions()}, DqnConfig{}, rng);
    const auto path = dir / ("fixture-" + std::to_string(i) + ".ckpt");
    {
      std::ofstream f(path, std::ios::binary);
      agent.checkpoint().save(f);
    }
    out.push_back({"fixture-" + std::to_string(i), load_checkpoint(path), {}});
  }
  return out;
}

inline CheckResult tournament(const std::filesystem::path& dir, int games = 1000) {
  Connect4Env env;
  const auto entries = fixture_checkpoints(dir);
  const auto results = run_tournament(entries, env, {games, 2, 11});
  bool sums_ok = true;
  for (const auto& r : results) sums_ok &= r.wins_a + r.wins_b + r.draws == r.games;
  const auto self = play_match(env, entries[0], entries[0], games, 2, 12);
  const double self_rate = self.win_rate_a();
  return {11, "tournament", results.size() == 6 && sums_ok && std::abs(self_rate - 0.5) <= 0.05,
          std::to_string(results.size()) + " pairings, outcome sums " +
              (sums_ok ? "exact" : "broken") + ", self-play win-rate " + detail::fmt(self_rate)};
}

/// Criteria 4 to 11.
inline std::vector<CheckResult> run_all(const std::filesystem::path& scratch) {
  return {opponent_value_identity(), shaping_sign(), zero_sum(), gradients(), chain_mdp(),
          pairing(), matchmaking(), tournament(scratch / "fixtures")};
}

}  // namespace mmx::verify
