#pragma once

// DuelSim: a small simultaneous-move sword duel.
//
// Each tick every fighter that is not stunned picks one of four actions.
//   Attack  - hits an opponent that is not blocking: 1 damage, and the target
//             is stunned for 2 ticks unless it is already stunned. Two
//             attacks clash and cancel. An attack into a block is parried and
//             the attacker loses its next tick.
//   Block   - negates an incoming attack.
//   Recover - steps back and regains footing; it staggers a blocking
//             opponent for one tick but leaves the fighter open to attacks.
//   NoOp    - does nothing. Stunned fighters are assigned NoOp.
// A clean hit therefore opens a short combo window, which makes decision
// counts differ between the fighters. The duel ends when a fighter's health
// reaches 0 (+10 / -10) or at the tick limit (draw, 0 / 0).

#include <array>
#include <cstdint>
#include <memory>
#include <utility>

#include "mmx/core.hpp"

namespace mmx {

enum class DuelAction : int { Attack = 0, Block = 1, Recover = 2, NoOp = 3 };

struct DuelState {
  static constexpr int kMaxHealth = 10;
  static constexpr int kHitStun = 2;
  static constexpr int kStaggerStun = 1;
  static constexpr int kDamage = 1;
  static constexpr int kNumActions = 4;
  static constexpr std::int64_t kMaxTicks = 100;
  static constexpr double kWinReward = 10.0;

  std::array<int, 2> health{kMaxHealth, kMaxHealth};
  std::array<int, 2> stun_ticks{0, 0};
  std::array<int, 2> last_action{static_cast<int>(DuelAction::NoOp),
                                 static_cast<int>(DuelAction::NoOp)};
  std::int64_t tick = 0;

  bool stunned(PlayerRole r) const { return stun_ticks[index(r)] > 0; }
  bool terminal() const { return health[0] <= 0 || health[1] <= 0 || tick >= kMaxTicks; }
  bool operator==(const DuelState&) const = default;
};

namespace duel {

/// 13 features from `viewer`'s side: healths, stuns, both last actions
/// (one-hot) and normalised time.
inline Observation observe(const DuelState& s, PlayerRole viewer) {
  const auto me = index(viewer);
  const auto them = index(opponent(viewer));
  Observation obs(13, 0.0);
  obs[0] = static_cast<double>(s.health[me]) / DuelState::kMaxHealth;
  obs[1] = static_cast<double>(s.health[them]) / DuelState::kMaxHealth;
  obs[2] = static_cast<double>(s.stun_ticks[me]) / DuelState::kHitStun;
  obs[3] = static_cast<double>(s.stun_ticks[them]) / DuelState::kHitStun;
  obs[4 + s.last_action[me]] = 1.0;
  obs[8 + s.last_action[them]] = 1.0;
  obs[12] = static_cast<double>(s.tick) / DuelState::kMaxTicks;
  return obs;
}

inline GameOutcome outcome(const DuelState& s) {
  if (s.health[0] <= 0) return GameOutcome::SecondWins;
  if (s.health[1] <= 0) return GameOutcome::FirstWins;
  if (s.tick >= DuelState::kMaxTicks) return GameOutcome::Draw;
  return GameOutcome::Ongoing;
}

}  // namespace duel

/// Pure transition function. Stunned fighters may omit their action or pass
/// NoOp; any other action from them is a caller error.
inline std::pair<DuelState, StepOutcome> duel_step(const DuelState& state,
                                                   const JointAction& actions) {
  if (state.terminal()) throw Error(Errc::TerminalState, "duel already finished");
  std::array<DuelAction, 2> act{};
  for (PlayerRole r : kRoles) {
    const auto& a = actions[index(r)];
    if (state.stunned(r)) {
      if (a && *a != static_cast<int>(DuelAction::NoOp)) {
        throw Error(Errc::NotYourTurn, std::string(to_string(r)) + " fighter is stunned");
      }
      act[index(r)] = DuelAction::NoOp;
      continue;
    }
    if (!a) throw Error(Errc::MissingAction, std::string(to_string(r)) + " fighter must act");
    if (*a < 0 || *a >= DuelState::kNumActions) {
      throw Error(Errc::IllegalAction, "duel action " + std::to_string(*a));
    }
    act[index(r)] = static_cast<DuelAction>(*a);
  }

  DuelState next = state;
  for (auto& s : next.stun_ticks) s = s > 0 ? s - 1 : 0;
  std::array<int, 2> damage{0, 0};
  std::array<int, 2> new_stun{0, 0};

  for (PlayerRole r : kRoles) {
    const auto me = index(r);
    const auto them = index(opponent(r));
    const bool target_stunned = state.stun_ticks[them] > 0;
    switch (act[me]) {
      case DuelAction::Attack:
        if (act[them] == DuelAction::Block) {
          new_stun[me] = DuelState::kStaggerStun;  // parried
        } else if (act[them] != DuelAction::Attack || target_stunned) {
          damage[them] += DuelState::kDamage;
          if (!target_stunned) new_stun[them] = DuelState::kHitStun;
        }
        break;
      case DuelAction::Recover:
        if (act[them] == DuelAction::Block) new_stun[them] = DuelState::kStaggerStun;
        break;
      case DuelAction::Block:
      case DuelAction::NoOp:
        break;
    }
  }

  for (std::size_t i = 0; i < 2; ++i) {
    next.health[i] = std::max(0, next.health[i] - damage[i]);
    next.stun_ticks[i] = std::max(next.stun_ticks[i], new_stun[i]);
    next.last_action[i] = static_cast<int>(act[i]);
  }
  ++next.tick;

  StepOutcome out;
  out.timestamp = next.tick;
  out.outcome = duel::outcome(next);
  out.done = out.outcome != GameOutcome::Ongoing;
  out.damage_taken = damage;
  for (PlayerRole r : kRoles) {
    out.observation[index(r)] = duel::observe(next, r);
    out.reward[index(r)] = DuelState::kWinReward * utility(out.outcome, r);
    out.decision_owner[index(r)] = !out.done && !next.stunned(r);
  }
  return {next, out};
}

class DuelSimEnv final : public Environment {
 public:
  std::string_view id() const override { return "duelsim"; }
  int num_actions() const override { return DuelState::kNumActions; }
  int observation_size() const override { return 13; }
  double reward_scale() const override { return DuelState::kWinReward; }
  bool simultaneous() const override { return true; }

  StepOutcome reset(std::uint64_t /*seed*/) override {
    state_ = DuelState{};
    StepOutcome out;
    for (PlayerRole r : kRoles) {
      out.observation[index(r)] = duel::observe(state_, r);
      out.decision_owner[index(r)] = true;
    }
    return out;
  }

  StepOutcome step(const JointAction& actions) override {
    auto [next, out] = duel_step(state_, actions);
    state_ = next;
    return out;
  }

  ActionMask legal_actions(PlayerRole role) const override {
    if (state_.terminal() || state_.stunned(role)) {
      throw Error(Errc::NotYourTurn, std::string(to_string(role)) + " fighter cannot act");
    }
    return ActionMask(DuelState::kNumActions, true);
  }

  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<DuelSimEnv>(*this);
  }

  const DuelState& state() const { return state_; }
  void set_state(const DuelState& s) { state_ = s; }

 private:
  DuelState state_{};
};

}  // namespace mmx
