#pragma once

// Two-player zero-sum environment contract plus the records every other
// module trades in: per-step outcomes, transitions and episode traces.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mmx/error.hpp"

namespace mmx {

using Rng = std::mt19937_64;
using Observation = std::vector<double>;
using ActionMask = std::vector<bool>;

enum class PlayerRole : std::uint8_t { First = 0, Second = 1 };

constexpr PlayerRole opponent(PlayerRole role) {
  return role == PlayerRole::First ? PlayerRole::Second : PlayerRole::First;
}

constexpr std::size_t index(PlayerRole role) { return static_cast<std::size_t>(role); }

constexpr std::array<PlayerRole, 2> kRoles{PlayerRole::First, PlayerRole::Second};

constexpr std::string_view to_string(PlayerRole role) {
  return role == PlayerRole::First ? "first" : "second";
}

enum class GameOutcome : std::uint8_t { Ongoing, FirstWins, SecondWins, Draw };

/// Terminal utility of `outcome` for `role` in {-1, 0, +1}.
constexpr double utility(GameOutcome outcome, PlayerRole role) {
  switch (outcome) {
    case GameOutcome::FirstWins: return role == PlayerRole::First ? 1.0 : -1.0;
    case GameOutcome::SecondWins: return role == PlayerRole::Second ? 1.0 : -1.0;
    default: return 0.0;
  }
}

/// An action per role; only roles in the decision owner set may carry one.
using JointAction = std::array<std::optional<int>, 2>;

struct StepOutcome {
  std::array<Observation, 2> observation;
  std::array<double, 2> reward{0.0, 0.0};
  bool done = false;
  std::array<bool, 2> decision_owner{false, false};
  std::int64_t timestamp = 0;
  GameOutcome outcome = GameOutcome::Ongoing;
  /// Damage each role received on this step (DuelSim only; zero elsewhere).
  std::array<int, 2> damage_taken{0, 0};

  bool owns(PlayerRole role) const { return decision_owner[index(role)]; }
};

struct Transition {
  Observation state;
  ActionMask legal;
  int action = 0;
  double reward = 0.0;
  Observation next_state;
  ActionMask next_legal;
  bool done = false;
  /// Tick at which the action was chosen.
  std::int64_t timestamp = 0;
  PlayerRole role = PlayerRole::First;
  int damage_dealt = 0;
  int damage_taken = 0;

  bool operator==(const Transition&) const = default;
};

struct RoleTrace {
  std::uint64_t episode_id = 0;
  PlayerRole role = PlayerRole::First;
  std::vector<Transition> transitions;
};

struct EpisodeTrace {
  std::uint64_t episode_id = 0;
  std::array<RoleTrace, 2> roles;
  /// Reward per role at every tick, indexed by tick.
  std::vector<std::array<double, 2>> step_rewards;
  GameOutcome final_outcome = GameOutcome::Ongoing;
  bool complete = false;

  const RoleTrace& role(PlayerRole r) const { return roles[index(r)]; }
  RoleTrace& role(PlayerRole r) { return roles[index(r)]; }
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string_view id() const = 0;
  virtual int num_actions() const = 0;
  virtual int observation_size() const = 0;
  /// Magnitude of the terminal win/loss reward.
  virtual double reward_scale() const = 0;
  virtual bool simultaneous() const = 0;

  virtual StepOutcome reset(std::uint64_t seed) = 0;
  virtual StepOutcome step(const JointAction& actions) = 0;
  virtual ActionMask legal_actions(PlayerRole role) const = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
};

inline bool any_legal(const ActionMask& mask) {
  for (bool b : mask) {
    if (b) return true;
  }
  return false;
}

/// Discounted return of `role` from t = 0 over the per-tick reward log.
inline double returns(const EpisodeTrace& trace, PlayerRole role, double discount) {
  if (!trace.complete) throw Error(Errc::IncompleteTrace, "episode has not terminated");
  double total = 0.0;
  double weight = 1.0;
  for (const auto& r : trace.step_rewards) {
    total += weight * r[index(role)];
    weight *= discount;
  }
  return total;
}

using Policy = std::function<int(const Observation&, const ActionMask&)>;

/// Plays one episode to termination and records both roles' transitions.
///
/// A role's transition opens when it acts and closes at its next decision
/// point (or at termination); rewards and damage in between accumulate onto
/// it. `max_ticks` guards against environments that fail to terminate.
inline EpisodeTrace run_episode(Environment& env, std::uint64_t seed, std::uint64_t episode_id,
                                const std::array<Policy, 2>& policies,
                                std::int64_t max_ticks = 100000) {
  EpisodeTrace trace;
  trace.episode_id = episode_id;
  for (PlayerRole r : kRoles) {
    trace.role(r).episode_id = episode_id;
    trace.role(r).role = r;
  }

  StepOutcome current = env.reset(seed);
  std::array<std::optional<Transition>, 2> pending;

  auto close = [&](PlayerRole r, const StepOutcome& at, bool done) {
    auto& open = pending[index(r)];
    if (!open) return;
    open->next_state = at.observation[index(r)];
    open->done = done;
    open->next_legal = done ? ActionMask(env.num_actions(), false) : env.legal_actions(r);
    trace.role(r).transitions.push_back(std::move(*open));
    open.reset();
  };

  while (!current.done) {
    if (current.timestamp >= max_ticks) {
      throw Error(Errc::IncompleteTrace, "episode exceeded tick limit");
    }
    JointAction joint;
    for (PlayerRole r : kRoles) {
      if (!current.owns(r)) continue;
      close(r, current, false);
      Transition t;
      t.state = current.observation[index(r)];
      t.legal = env.legal_actions(r);
      t.action = policies[index(r)](t.state, t.legal);
      t.timestamp = current.timestamp;
      t.role = r;
      joint[index(r)] = t.action;
      pending[index(r)] = std::move(t);
    }
    StepOutcome next = env.step(joint);
    trace.step_rewards.push_back(next.reward);
    for (PlayerRole r : kRoles) {
      auto& open = pending[index(r)];
      if (!open) continue;
      open->reward += next.reward[index(r)];
      open->damage_taken += next.damage_taken[index(r)];
      open->damage_dealt += next.damage_taken[index(opponent(r))];
    }
    current = std::move(next);
  }
  for (PlayerRole r : kRoles) close(r, current, true);
  trace.final_outcome = current.outcome;
  trace.complete = true;
  return trace;
}

// Newline-delimited trace records: one JSON object per transition.

inline void write_trace(std::ostream& out, const EpisodeTrace& trace) {
  for (PlayerRole r : kRoles) {
    for (const auto& t : trace.role(r).transitions) {
      nlohmann::json line = {
          {"episode", trace.episode_id},
          {"role", to_string(r)},
          {"timestamp", t.timestamp},
          {"state", t.state},
          {"action", t.action},
          {"reward", t.reward},
          {"next_state", t.next_state},
          {"done", t.done ? 1 : 0},
      };
      out << line.dump() << '\n';
    }
  }
}

/// Reads records back grouped by episode id, in file order.
inline std::vector<EpisodeTrace> read_traces(std::istream& in) {
  std::vector<EpisodeTrace> traces;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::Io, std::string("malformed trace record: ") + e.what());
    }
    const auto id = j.at("episode").get<std::uint64_t>();
    if (traces.empty() || traces.back().episode_id != id) {
      traces.emplace_back();
      traces.back().episode_id = id;
      for (PlayerRole r : kRoles) {
        traces.back().role(r).episode_id = id;
        traces.back().role(r).role = r;
      }
    }
    Transition t;
    t.role = j.at("role").get<std::string>() == "first" ? PlayerRole::First : PlayerRole::Second;
    t.timestamp = j.at("timestamp").get<std::int64_t>();
    t.state = j.at("state").get<Observation>();
    t.action = j.at("action").get<int>();
    t.reward = j.at("reward").get<double>();
    t.next_state = j.at("next_state").get<Observation>();
    t.done = j.at("done").get<int>() != 0;
    auto& rt = traces.back().role(t.role);
    rt.transitions.push_back(std::move(t));
    if (rt.transitions.back().done) traces.back().complete = true;
  }
  return traces;
}

}  // namespace mmx
