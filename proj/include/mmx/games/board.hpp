#pragma once

// Shared machinery for the alternating-move board games: cell type, the
// one-hot observation planes and a generic Environment adapter.

#include <algorithm>
#include <array>
#include <concepts>
#include <cstdint>
#include <memory>
#include <string_view>

#include "mmx/core.hpp"

namespace mmx {

enum class Cell : std::uint8_t { Empty = 0, First = 1, Second = 2 };

constexpr Cell stone(PlayerRole role) {
  return role == PlayerRole::First ? Cell::First : Cell::Second;
}

template <class R>
concept TurnBasedRules = requires(const typename R::State& s, int a, const Observation& obs) {
  { R::kId } -> std::convertible_to<std::string_view>;
  { R::kNumActions } -> std::convertible_to<int>;
  { R::kNumCells } -> std::convertible_to<int>;
  { R::initial() } -> std::same_as<typename R::State>;
  { R::outcome(s) } -> std::same_as<GameOutcome>;
  { R::is_legal(s, a) } -> std::same_as<bool>;
  { R::apply(s, a) } -> std::same_as<typename R::State>;
  { R::to_move(s) } -> std::same_as<PlayerRole>;
  { R::cells(s) };
  { R::decode(obs) } -> std::same_as<typename R::State>;
};

namespace board {

/// Three planes (empty, own, opponent) flattened plane-major.
template <std::size_t N>
Observation observe(const std::array<Cell, N>& cells, PlayerRole viewer) {
  Observation obs(3 * N, 0.0);
  const Cell own = stone(viewer);
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t plane = cells[i] == Cell::Empty ? 0 : (cells[i] == own ? 1 : 2);
    obs[plane * N + i] = 1.0;
  }
  return obs;
}

/// Inverse of observe() for a viewer who is about to move.
template <std::size_t N>
std::pair<std::array<Cell, N>, PlayerRole> decode(const Observation& obs) {
  if (obs.size() != 3 * N) throw Error(Errc::DimensionMismatch, "board observation size");
  int own = 0;
  int other = 0;
  for (std::size_t i = 0; i < N; ++i) {
    own += obs[N + i] > 0.5;
    other += obs[2 * N + i] > 0.5;
  }
  PlayerRole viewer;
  if (own == other) {
    viewer = PlayerRole::First;
  } else if (own + 1 == other) {
    viewer = PlayerRole::Second;
  } else {
    throw Error(Errc::InvalidState, "observer is not the side to move");
  }
  std::array<Cell, N> cells{};
  for (std::size_t i = 0; i < N; ++i) {
    if (obs[N + i] > 0.5) {
      cells[i] = stone(viewer);
    } else if (obs[2 * N + i] > 0.5) {
      cells[i] = stone(opponent(viewer));
    }
  }
  return {cells, viewer};
}

template <std::size_t N>
std::pair<int, int> counts(const std::array<Cell, N>& cells) {
  int first = 0;
  int second = 0;
  for (Cell c : cells) {
    first += c == Cell::First;
    second += c == Cell::Second;
  }
  return {first, second};
}

}  // namespace board

template <TurnBasedRules Rules>
class TurnBasedEnv final : public Environment {
 public:
  using State = typename Rules::State;

  std::string_view id() const override { return Rules::kId; }
  int num_actions() const override { return Rules::kNumActions; }
  int observation_size() const override { return 3 * Rules::kNumCells; }
  double reward_scale() const override { return 1.0; }
  bool simultaneous() const override { return false; }

  StepOutcome reset(std::uint64_t /*seed*/) override {
    state_ = Rules::initial();
    tick_ = 0;
    done_ = false;
    return snapshot(GameOutcome::Ongoing);
  }

  StepOutcome step(const JointAction& actions) override {
    if (done_) throw Error(Errc::TerminalState, "step after episode end");
    const PlayerRole mover = Rules::to_move(state_);
    if (actions[index(opponent(mover))]) {
      throw Error(Errc::NotYourTurn, "action supplied for the waiting player");
    }
    const auto& action = actions[index(mover)];
    if (!action) throw Error(Errc::MissingAction, "mover supplied no action");
    if (*action < 0 || *action >= Rules::kNumActions || !Rules::is_legal(state_, *action)) {
      throw Error(Errc::IllegalAction, "action " + std::to_string(*action) + " is not legal");
    }
    state_ = Rules::apply(state_, *action);
    ++tick_;
    const GameOutcome result = Rules::outcome(state_);
    done_ = result != GameOutcome::Ongoing;
    StepOutcome out = snapshot(result);
    if (done_) {
      for (PlayerRole r : kRoles) out.reward[index(r)] = utility(result, r);
    }
    return out;
  }

  ActionMask legal_actions(PlayerRole role) const override {
    if (done_ || role != Rules::to_move(state_)) {
      throw Error(Errc::NotYourTurn, std::string(to_string(role)) + " is not to move");
    }
    ActionMask mask(Rules::kNumActions, false);
    for (int a = 0; a < Rules::kNumActions; ++a) mask[a] = Rules::is_legal(state_, a);
    return mask;
  }

  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<TurnBasedEnv>(*this);
  }

  const State& state() const { return state_; }

  /// Positions the environment at an arbitrary valid state (tests, openings).
  void set_state(const State& state) {
    done_ = Rules::outcome(state) != GameOutcome::Ongoing;
    state_ = state;
  }

 private:
  StepOutcome snapshot(GameOutcome result) const {
    StepOutcome out;
    for (PlayerRole r : kRoles) out.observation[index(r)] = board::observe(Rules::cells(state_), r);
    out.done = result != GameOutcome::Ongoing;
    out.outcome = result;
    out.timestamp = tick_;
    if (!out.done) out.decision_owner[index(Rules::to_move(state_))] = true;
    return out;
  }

  State state_ = Rules::initial();
  std::int64_t tick_ = 0;
  bool done_ = false;
};

}  // namespace mmx
