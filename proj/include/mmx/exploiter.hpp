#pragma once

// Exploiter reward transforms. The Minimax mode subtracts the frozen
// opponent's (shifted) best next-state value from the exploiter's reward:
//
//   r' = r - alpha * gamma * (1 - d) * (max_a Q_opp(s', a) + shift)
//
// with shift = |R_min|, so the added term is never positive while the
// opponent's values stay inside the reward bounds. In simultaneous games
// s' is found by chronological pairing of the two players' decision streams.

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmx/core.hpp"
#include "mmx/dqn.hpp"
#include "mmx/games/board.hpp"
#include "mmx/minimax.hpp"

namespace mmx {

enum class ExploiterMode { Vanilla, Minimax, GammaZero, Aggressive, Defensive };

constexpr std::string_view to_string(ExploiterMode m) {
  switch (m) {
    case ExploiterMode::Vanilla: return "vanilla";
    case ExploiterMode::Minimax: return "minimax";
    case ExploiterMode::GammaZero: return "gamma_zero";
    case ExploiterMode::Aggressive: return "aggressive";
    case ExploiterMode::Defensive: return "defensive";
  }
  return "unknown";
}

inline ExploiterMode parse_mode(std::string_view s) {
  for (auto m : {ExploiterMode::Vanilla, ExploiterMode::Minimax, ExploiterMode::GammaZero,
                 ExploiterMode::Aggressive, ExploiterMode::Defensive}) {
    if (s == to_string(m)) return m;
  }
  throw Error(Errc::ConfigInvalid, "unknown exploiter mode '" + std::string(s) + "'");
}

struct ExploiterRewardConfig {
  double alpha = 0.1;
  /// Discount inside the shaping term; independent of the learner's TD gamma.
  double gamma = 0.995;
  double reward_min = -1.0;
  double reward_max = 1.0;
  double shift = 1.0;
  /// Dense bonus / penalty per point of damage for Aggressive / Defensive.
  double hit_reward = 1.0;
  ExploiterMode mode = ExploiterMode::Minimax;

  static ExploiterRewardConfig for_bounds(ExploiterMode mode, double alpha, double r_min,
                                          double r_max) {
    ExploiterRewardConfig c;
    c.mode = mode;
    c.alpha = alpha;
    c.reward_min = r_min;
    c.reward_max = r_max;
    c.shift = std::abs(r_min);
    c.validate();
    return c;
  }

  /// Shift from the opponent's tracked minimum value when R_min is unknown.
  void shift_from_running_min(double min_value) {
    if (!std::isfinite(min_value)) throw Error(Errc::NonFiniteInput, "running minimum");
    shift = std::abs(min_value);
  }

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::ConfigInvalid, "alpha outside [0, 1]");
    if (!(reward_min <= reward_max)) throw Error(Errc::ConfigInvalid, "reward_min > reward_max");
    if (!std::isfinite(gamma) || !std::isfinite(shift)) {
      throw Error(Errc::ConfigInvalid, "non-finite gamma or shift");
    }
  }
};

/// The gamma-zero ablation as a parameter overlay: full-strength shaping and
/// a learner that bootstraps nothing, so Q regresses onto the shaped reward.
inline void apply_gamma_zero_overlay(ExploiterRewardConfig& reward, DqnConfig& learner) {
  reward.mode = ExploiterMode::GammaZero;
  reward.alpha = 1.0;
  learner.gamma = 0.0;
}

inline bool uses_opponent_values(ExploiterMode m) {
  return m == ExploiterMode::Minimax || m == ExploiterMode::GammaZero;
}

/// The shaped reward. Terminal transitions (done) are never shaped.
inline double minimax_reward(double r_env, double opp_max_q, bool done,
                             const ExploiterRewardConfig& cfg) {
  if (!uses_opponent_values(cfg.mode)) {
    throw Error(Errc::ConfigInvalid, "minimax_reward needs minimax or gamma_zero mode");
  }
  if (!std::isfinite(r_env) || !std::isfinite(opp_max_q)) {
    throw Error(Errc::NonFiniteInput, "reward or opponent value is not finite");
  }
  if (done) return r_env;
  return r_env - cfg.alpha * cfg.gamma * (opp_max_q + cfg.shift);
}

/// True iff the shifted opponent term -max_q - |R_min| is non-positive.
inline bool shift_bound_check(double opp_max_q, const ExploiterRewardConfig& cfg) {
  return -opp_max_q - std::abs(cfg.reward_min) <= 0.0;
}

struct PairedTransition {
  Transition exploiter;
  /// Opponent decision state paired with the exploiter's action; absent when
  /// the episode ended first (terminal pairing, no shaping).
  std::optional<Observation> opponent_state;
  ActionMask opponent_legal;
  std::int64_t pairing_timestamp = 0;

  bool terminal_paired() const { return !opponent_state.has_value(); }
};

namespace detail {
inline void require_sorted(const RoleTrace& t) {
  for (std::size_t i = 1; i < t.transitions.size(); ++i) {
    if (t.transitions[i].timestamp <= t.transitions[i - 1].timestamp) {
      throw Error(Errc::UnsortedTrace, "timestamps not strictly increasing");
    }
  }
}
}  // namespace detail

/// Chronological pairing. An exploiter action taken at tick t produces the
/// state at tick t + 1; it is paired with the opponent's earliest decision
/// state at or after t + 1. Opponent states may be shared.
inline std::vector<PairedTransition> pair_transitions(const RoleTrace& exploiter,
                                                      const RoleTrace& opponent_trace) {
  if (exploiter.episode_id != opponent_trace.episode_id) {
    throw Error(Errc::EpisodeMismatch, "traces come from different episodes");
  }
  if (exploiter.role == opponent_trace.role) {
    throw Error(Errc::EpisodeMismatch, "both traces belong to the same role");
  }
  detail::require_sorted(exploiter);
  detail::require_sorted(opponent_trace);

  std::vector<PairedTransition> out;
  out.reserve(exploiter.transitions.size());
  const auto& opp = opponent_trace.transitions;
  std::size_t cursor = 0;
  for (const auto& t : exploiter.transitions) {
    const std::int64_t after = t.timestamp + 1;
    while (cursor < opp.size() && opp[cursor].timestamp < after) ++cursor;
    PairedTransition p{t, std::nullopt, {}, after};
    if (cursor < opp.size()) {
      p.opponent_state = opp[cursor].state;
      p.opponent_legal = opp[cursor].legal;
      p.pairing_timestamp = opp[cursor].timestamp;
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// Side-effect-free access to the opponent's best value at a state it faces.
class OpponentEvaluator {
 public:
  virtual ~OpponentEvaluator() = default;
  virtual double max_value(const Observation& opponent_state, const ActionMask& legal) const = 0;
};

/// Masked max-Q of a frozen network.
class QNetworkEvaluator final : public OpponentEvaluator {
 public:
  explicit QNetworkEvaluator(std::shared_ptr<const Agent> model) : model_(std::move(model)) {}
  double max_value(const Observation& s, const ActionMask& legal) const override {
    return model_->max_q(s, legal);
  }

 private:
  std::shared_ptr<const Agent> model_;
};

/// Minimax value of the position for the side to move, decoded from that
/// side's observation.
template <TurnBasedRules Rules>
class MinimaxEvaluator final : public OpponentEvaluator {
 public:
  explicit MinimaxEvaluator(std::shared_ptr<const Minimax<Rules>> search)
      : search_(std::move(search)) {}
  double max_value(const Observation& s, const ActionMask& /*legal*/) const override {
    const auto state = Rules::decode(s);
    return search_->value_proxy(state, Rules::to_move(state));
  }

 private:
  std::shared_ptr<const Minimax<Rules>> search_;
};

struct BatchAudit {
  std::size_t transitions = 0;
  std::size_t evaluated = 0;
  std::size_t bound_violations = 0;
  double sum_shaped_reward = 0.0;
  double sum_opp_max_q = 0.0;

  double mean_shaped_reward() const {
    return transitions ? sum_shaped_reward / static_cast<double>(transitions) : 0.0;
  }
  double mean_opp_max_q() const {
    return evaluated ? sum_opp_max_q / static_cast<double>(evaluated) : 0.0;
  }
};

/// Rewrites rewards according to cfg.mode. Terminal-paired transitions are
/// never shaped. `evaluator` may be null for the
/// modes that do not consult the opponent.
inline std::vector<Transition> transform_batch(std::span<const PairedTransition> paired,
                                               const OpponentEvaluator* evaluator,
                                               const ExploiterRewardConfig& cfg,
                                               BatchAudit* audit = nullptr) {
  std::vector<Transition> out;
  out.reserve(paired.size());
  for (const auto& p : paired) {
    Transition t = p.exploiter;
    switch (cfg.mode) {
      case ExploiterMode::Vanilla:
        break;
      case ExploiterMode::Aggressive:
        t.reward += cfg.hit_reward * t.damage_dealt;
        break;
      case ExploiterMode::Defensive:
        t.reward -= cfg.hit_reward * t.damage_taken;
        break;
      case ExploiterMode::Minimax:
      case ExploiterMode::GammaZero: {
        // The shaping term's d is whether the opponent still faced a state
        // after this action, not whether the exploiter acts again: an action
        // answered by a winning reply is still judged by the opponent's value.
        if (p.terminal_paired()) break;
        if (p.pairing_timestamp < t.timestamp + 1) {
          throw Error(Errc::MissingPairing, "transition at tick " + std::to_string(t.timestamp) +
                                                " is paired with an earlier opponent state");
        }
        if (!evaluator) throw Error(Errc::ConfigInvalid, "minimax shaping needs an evaluator");
        const double v = evaluator->max_value(*p.opponent_state, p.opponent_legal);
        t.reward = minimax_reward(t.reward, v, false, cfg);
        if (audit) {
          ++audit->evaluated;
          audit->sum_opp_max_q += v;
          audit->bound_violations += shift_bound_check(v, cfg) ? 0 : 1;
        }
        break;
      }
    }
    if (audit) {
      ++audit->transitions;
      audit->sum_shaped_reward += t.reward;
    }
    out.push_back(std::move(t));
  }
  return out;
}

/// Appends audit rows as `batch,transitions,violations,mean_shaped_reward,mean_opp_max_q`.
class AuditLog {
 public:
  explicit AuditLog(std::ostream& out) : out_(out) {
    out_ << "batch,transitions,violations,mean_shaped_reward,mean_opp_max_q\n";
  }
  void write(const BatchAudit& a) {
    out_ << batch_++ << ',' << a.transitions << ',' << a.bound_violations << ','
         << a.mean_shaped_reward() << ',' << a.mean_opp_max_q() << '\n';
  }

 private:
  std::ostream& out_;
  std::size_t batch_ = 0;
};

}  // namespace mmx
