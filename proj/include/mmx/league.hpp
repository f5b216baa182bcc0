#pragma once

// Two-archetype league bookkeeping: the opponent pool with win-rate
// proportional matchmaking, sliding-window convergence monitors and the
// Main Agent / Main Exploiter generation lifecycle.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mmx/core.hpp"
#include "mmx/dqn.hpp"

namespace mmx {

enum class Archetype { MainAgentSnapshot, ConvergedExploiter, Scripted };

constexpr std::string_view to_string(Archetype a) {
  switch (a) {
    case Archetype::MainAgentSnapshot: return "main_snapshot";
    case Archetype::ConvergedExploiter: return "converged_exploiter";
    case Archetype::Scripted: return "scripted";
  }
  return "unknown";
}

enum class MatchResult { Win, Loss, Draw };

inline MatchResult result_for(GameOutcome o, PlayerRole role) {
  const double u = utility(o, role);
  return u > 0 ? MatchResult::Win : (u < 0 ? MatchResult::Loss : MatchResult::Draw);
}

struct OpponentPoolEntry {
  std::string id;
  Archetype archetype = Archetype::Scripted;
  /// Frozen network; null for scripted opponents.
  std::shared_ptr<const Agent> model;
  /// Empirical win-rate of this entry against the current Main Agent.
  double win_rate_vs_main = 0.0;
  std::int64_t games_played = 0;
};

/// Append-only. Entries keep their index for the life of the pool.
class OpponentPool {
 public:
  explicit OpponentPool(std::size_t result_window = 200) : window_(result_window) {}

  std::size_t add(OpponentPoolEntry entry) {
    if (entry.id.empty() || find(entry.id)) {
      throw Error(Errc::InconsistentEvent, "pool ids must be unique and non-empty: '" +
                                               entry.id + "'");
    }
    entries_.push_back(std::move(entry));
    recent_.emplace_back();
    return entries_.size() - 1;
  }

  const std::vector<OpponentPoolEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const OpponentPoolEntry& operator[](std::size_t i) const { return entries_.at(i); }

  const OpponentPoolEntry* find(std::string_view id) const {
    for (const auto& e : entries_) {
      if (e.id == id) return &e;
    }
    return nullptr;
  }

  /// Records a Main Agent match from the Main Agent's side; the entry's
  /// win-rate is refreshed over its most recent `result_window` games.
  void record_main_result(std::size_t i, MatchResult main_result) {
    auto& recent = recent_.at(i);
    recent.push_back(main_result == MatchResult::Loss);
    if (recent.size() > window_) recent.pop_front();
    auto& e = entries_[i];
    ++e.games_played;
    e.win_rate_vs_main = static_cast<double>(std::count(recent.begin(), recent.end(), true)) /
                         static_cast<double>(recent.size());
  }

 private:
  std::size_t window_;
  std::vector<OpponentPoolEntry> entries_;
  std::vector<std::deque<bool>> recent_;
};

inline constexpr double kUniformMixing = 0.1;

/// Selection probability of every entry: 0.9 * proportional + 0.1 * uniform.
/// If every win-rate is zero the proportional part is uniform as well.
inline std::vector<double> sampling_probabilities(const OpponentPool& pool) {
  if (pool.empty()) throw Error(Errc::EmptyPool, "no opponents to sample");
  const auto n = static_cast<double>(pool.size());
  double total = 0.0;
  for (const auto& e : pool.entries()) total += e.win_rate_vs_main;
  std::vector<double> p;
  for (const auto& e : pool.entries()) {
    const double prop = total > 0.0 ? e.win_rate_vs_main / total : 1.0 / n;
    p.push_back((1.0 - kUniformMixing) * prop + kUniformMixing / n);
  }
  return p;
}

inline std::size_t sample_opponent(const OpponentPool& pool, Rng& rng) {
  if (pool.empty()) throw Error(Errc::EmptyPool, "no opponents to sample");
  const bool uniform = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < kUniformMixing;
  double total = 0.0;
  for (const auto& e : pool.entries()) total += e.win_rate_vs_main;
  if (uniform || total <= 0.0) {
    return std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng);
  }
  std::vector<double> weights;
  for (const auto& e : pool.entries()) weights.push_back(e.win_rate_vs_main);
  return std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(rng);
}

/// Sliding-window win counters, one per tracked opponent. Draws and losses
/// both count as non-wins.
class ConvergenceMonitor {
 public:
  explicit ConvergenceMonitor(double threshold = 0.85, std::size_t window = 200)
      : threshold_(threshold), window_(window) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
      throw Error(Errc::ConfigInvalid, "convergence threshold outside (0, 1]");
    }
    if (window < 1) throw Error(Errc::ConfigInvalid, "convergence window < 1");
  }

  double threshold() const { return threshold_; }
  std::size_t window() const { return window_; }

  void track(const std::string& id) { results_.try_emplace(id); }
  void reset(const std::string& id) { results_[id].clear(); }
  bool tracks(const std::string& id) const { return results_.contains(id); }

  void record_result(const std::string& id, MatchResult r) {
    auto it = results_.find(id);
    if (it == results_.end()) throw Error(Errc::UnknownOpponent, "untracked opponent '" + id + "'");
    it->second.push_back(r == MatchResult::Win);
    if (it->second.size() > window_) it->second.pop_front();
  }

  bool ready(const std::string& id) const { return history(id).size() >= window_; }

  std::size_t games(const std::string& id) const { return history(id).size(); }

  double win_rate(const std::string& id) const {
    const auto& h = history(id);
    if (h.empty()) return 0.0;
    return static_cast<double>(std::count(h.begin(), h.end(), true)) /
           static_cast<double>(h.size());
  }

 private:
  const std::deque<bool>& history(const std::string& id) const {
    auto it = results_.find(id);
    if (it == results_.end()) throw Error(Errc::UnknownOpponent, "untracked opponent '" + id + "'");
    return it->second;
  }

  double threshold_;
  std::size_t window_;
  std::map<std::string, std::deque<bool>> results_;
};

/// The exploiter has converged on its frozen target.
inline bool exploiter_converged(const ConvergenceMonitor& m, const std::string& target) {
  if (!m.ready(target)) throw Error(Errc::NotReady, "window not full for '" + target + "'");
  return m.win_rate(target) >= m.threshold();
}

/// The Main Agent has converged against every pool member. An empty pool is
/// vacuously converged.
inline bool main_converged(const ConvergenceMonitor& m, const OpponentPool& pool) {
  for (const auto& e : pool.entries()) {
    if (!m.ready(e.id)) throw Error(Errc::NotReady, "window not full for '" + e.id + "'");
  }
  for (const auto& e : pool.entries()) {
    if (m.win_rate(e.id) < m.threshold()) return false;
  }
  return true;
}

struct GenerationState {
  int generation = 0;
  /// Newest frozen Main Agent snapshot.
  std::string main_snapshot;
  /// The single snapshot the current exploiter trains against.
  std::string exploiter_target;
  bool exploiter_idle = false;
  int converged_exploiters = 0;
  int main_convergences = 0;
};

enum class LeagueEventKind { ExploiterConverged, MainConverged };

struct LeagueEvent {
  LeagueEventKind kind;
  /// Checkpoint frozen into the pool by this event.
  OpponentPoolEntry entry;
  /// For MainConverged: id of the new Main Agent snapshot the exploiter may
  /// target next (usually entry.id).
  std::string snapshot_id;
};

struct GenerationAdvance {
  GenerationState state;
  /// The exploiter must restart from fresh random parameters against
  /// state.exploiter_target.
  bool reset_exploiter = false;
};

inline GenerationAdvance advance_generation(const GenerationState& s, LeagueEvent event,
                                            OpponentPool& pool) {
  GenerationAdvance out{s, false};
  auto& n = out.state;
  switch (event.kind) {
    case LeagueEventKind::ExploiterConverged:
      if (s.exploiter_idle) throw Error(Errc::InconsistentEvent, "idle exploiter cannot converge");
      event.entry.archetype = Archetype::ConvergedExploiter;
      pool.add(std::move(event.entry));
      ++n.converged_exploiters;
      if (n.main_snapshot != n.exploiter_target) {
        ++n.generation;
        n.exploiter_target = n.main_snapshot;
        out.reset_exploiter = true;
      } else {
        n.exploiter_idle = true;
      }
      break;
    case LeagueEventKind::MainConverged:
      if (event.snapshot_id.empty()) event.snapshot_id = event.entry.id;
      if (event.snapshot_id == s.main_snapshot) {
        throw Error(Errc::InconsistentEvent, "main snapshot id reused");
      }
      event.entry.archetype = Archetype::MainAgentSnapshot;
      pool.add(std::move(event.entry));
      n.main_snapshot = event.snapshot_id;
      ++n.main_convergences;
      if (n.exploiter_idle) {
        ++n.generation;
        n.exploiter_target = n.main_snapshot;
        n.exploiter_idle = false;
        out.reset_exploiter = true;
      }
      break;
  }
  return out;
}

/// Append-only, one line per league event.
class LeagueJournal {
 public:
  explicit LeagueJournal(std::ostream* out = nullptr) : out_(out) {}

  void log(std::int64_t env_steps, const GenerationState& s, std::string_view event,
           std::string_view checkpoint, std::size_t pool_size) {
    std::string line = "step=" + std::to_string(env_steps) +
                       " generation=" + std::to_string(s.generation) + " event=" +
                       std::string(event) + " checkpoint=" + std::string(checkpoint) +
                       " pool_size=" + std::to_string(pool_size) +
                       " converged_exploiters=" + std::to_string(s.converged_exploiters);
    lines_.push_back(line);
    if (out_) *out_ << line << '\n';
  }

  const std::vector<std::string>& lines() const { return lines_; }

 private:
  std::ostream* out_;
  std::vector<std::string> lines_;
};

}  // namespace mmx
