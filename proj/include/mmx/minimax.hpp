#pragma once

// Exact and depth-limited minimax over the turn-based games. Used as the
// scripted opponent and as an exact position evaluator.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mmx/core.hpp"
#include "mmx/games/board.hpp"

namespace mmx {

struct MinimaxConfig {
  /// Plies searched from the root; nullopt searches to terminal positions.
  std::optional<int> max_depth;
  std::uint64_t tie_break_seed = 0;
};

struct Evaluation {
  /// From the evaluated role's perspective, in [-1, 1].
  double value = 0.0;
  /// Lowest-index optimal action of the side to move.
  int best_action = -1;
};

template <class R>
concept MemoizableRules = TurnBasedRules<R> && requires(const typename R::State& s) {
  { R::key(s) } -> std::convertible_to<std::uint32_t>;
};

template <TurnBasedRules Rules>
class Minimax {
 public:
  using State = typename Rules::State;

  explicit Minimax(MinimaxConfig config = {}) : config_(config) {
    if (config_.max_depth && *config_.max_depth < 1) {
      throw Error(Errc::ConfigInvalid, "minimax depth must be at least 1");
    }
    if constexpr (MemoizableRules<Rules>) {
      if (!config_.max_depth) solve_all(Rules::initial());
    }
  }

  const MinimaxConfig& config() const { return config_; }

  /// Value of every legal root action for the side to move.
  std::vector<std::pair<int, int>> root_values(const State& s) const {
    if (Rules::outcome(s) != GameOutcome::Ongoing) {
      throw Error(Errc::TerminalState, "cannot search a finished game");
    }
    const int child_depth = config_.max_depth ? *config_.max_depth - 1 : kUnlimited;
    std::vector<std::pair<int, int>> values;
    for (int a = 0; a < Rules::kNumActions; ++a) {
      if (!Rules::is_legal(s, a)) continue;
      values.emplace_back(a, -search(Rules::apply(s, a), child_depth, -kInf, kInf));
    }
    return values;
  }

  Evaluation evaluate(const State& s, PlayerRole role) const {
    const auto values = root_values(s);
    Evaluation e{-2.0, -1};
    for (const auto& [a, v] : values) {
      if (v > e.value) e = {static_cast<double>(v), a};
    }
    if (role != Rules::to_move(s)) e.value = -e.value;
    return e;
  }

  /// Uniform choice among optimal root actions.
  int act(const State& s, PlayerRole role, Rng& rng) const {
    if (role != Rules::to_move(s)) {
      throw Error(Errc::NotYourTurn, std::string(to_string(role)) + " is not to move");
    }
    const auto values = root_values(s);
    int best = -2;
    for (const auto& [a, v] : values) best = std::max(best, v);
    std::vector<int> optimal;
    for (const auto& [a, v] : values) {
      if (v == best) optimal.push_back(a);
    }
    std::uniform_int_distribution<std::size_t> pick(0, optimal.size() - 1);
    return optimal[pick(rng)];
  }

  int act(const State& s, PlayerRole role) const {
    Rng rng(config_.tie_break_seed);
    return act(s, role, rng);
  }

  /// Terminal utility at finished positions, search value otherwise.
  double value_proxy(const State& s, PlayerRole role) const {
    const GameOutcome o = Rules::outcome(s);
    if (o != GameOutcome::Ongoing) return utility(o, role);
    return evaluate(s, role).value;
  }

 private:
  static constexpr int kUnlimited = std::numeric_limits<int>::max();
  static constexpr int kInf = 2;

  // Negamax with alpha-beta; value for the side to move. Root actions are
  // searched with a full window so every root value is exact.
  int search(const State& s, int depth, int alpha, int beta) const {
    const GameOutcome o = Rules::outcome(s);
    if (o != GameOutcome::Ongoing) return static_cast<int>(utility(o, Rules::to_move(s)));
    if constexpr (MemoizableRules<Rules>) {
      if (depth == kUnlimited) {
        if (auto it = table_.find(Rules::key(s)); it != table_.end()) return it->second;
      }
    }
    if (depth == 0) return 0;
    const int next_depth = depth == kUnlimited ? kUnlimited : depth - 1;
    int best = -kInf;
    for (int a = 0; a < Rules::kNumActions; ++a) {
      if (!Rules::is_legal(s, a)) continue;
      best = std::max(best, -search(Rules::apply(s, a), next_depth, -beta, -alpha));
      alpha = std::max(alpha, best);
      if (alpha >= beta) break;
    }
    return best;
  }

  // Exact values of every position reachable from `s`, filled once at
  // construction so lookups stay read-only afterwards.
  int solve_all(const State& s) {
    const auto key = Rules::key(s);
    if (auto it = table_.find(key); it != table_.end()) return it->second;
    int value;
    const GameOutcome o = Rules::outcome(s);
    if (o != GameOutcome::Ongoing) {
      value = static_cast<int>(utility(o, Rules::to_move(s)));
    } else {
      value = -kInf;
      for (int a = 0; a < Rules::kNumActions; ++a) {
        if (Rules::is_legal(s, a)) value = std::max(value, -solve_all(Rules::apply(s, a)));
      }
    }
    table_.emplace(key, static_cast<std::int8_t>(value));
    return value;
  }

  MinimaxConfig config_;
  std::unordered_map<std::uint32_t, std::int8_t> table_;
};

}  // namespace mmx
