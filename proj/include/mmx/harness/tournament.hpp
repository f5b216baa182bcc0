#pragma once

// Round-robin evaluation of frozen checkpoints. Play is greedy apart from a
// few uniformly random opening decisions per side, drawn from a per-game
// seed so that game 2k and game 2k+1 replay the same opening with the sides
// swapped.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "mmx/core.hpp"
#include "mmx/dqn.hpp"
#include "mmx/league.hpp"

namespace mmx {

struct TournamentEntry {
  std::string id;
  std::shared_ptr<const Agent> agent;
  /// Scripted player used when `agent` is null; with neither, the entry
  /// plays uniformly random legal actions.
  Policy scripted;
};

struct TournamentResult {
  std::string a;
  std::string b;
  int games = 0;
  int wins_a = 0;
  int wins_b = 0;
  int draws = 0;

  double win_rate_a() const { return games ? static_cast<double>(wins_a) / games : 0.0; }
  double win_rate_b() const { return games ? static_cast<double>(wins_b) / games : 0.0; }
  double draw_rate() const { return games ? static_cast<double>(draws) / games : 0.0; }
};

struct TournamentConfig {
  int games_per_pair = 1000;
  /// Random decisions each side makes before greedy play takes over.
  int opening_decisions = 2;
  std::uint64_t seed = 0;
};

inline void check_compatible(const std::vector<TournamentEntry>& entries, const Environment& env) {
  for (const auto& e : entries) {
    if (!e.agent) continue;
    const auto& s = e.agent->spec();
    if (s.input_dim != env.observation_size() || s.output_dim != env.num_actions()) {
      throw Error(Errc::IncompatibleCheckpoints,
                  "checkpoint '" + e.id + "' does not fit environment " + std::string(env.id()));
    }
  }
}

namespace tournament_detail {

inline Policy opening_then_greedy(const TournamentEntry& e, int opening, std::shared_ptr<Rng> rng) {
  auto decisions = std::make_shared<int>(0);
  return [agent = e.agent, scripted = e.scripted, opening, rng, decisions](
             const Observation& obs, const ActionMask& mask) {
    const bool random = (*decisions)++ < opening || (!agent && !scripted);
    if (!random && !agent) return scripted(obs, mask);
    if (random) {
      std::vector<int> legal;
      for (std::size_t a = 0; a < mask.size(); ++a) {
        if (mask[a]) legal.push_back(static_cast<int>(a));
      }
      return legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(*rng)];
    }
    return agent->greedy_action(obs, mask);
  };
}

}  // namespace tournament_detail

/// `games` games between a and b, alternating which of them moves first.
inline TournamentResult play_match(Environment& env, const TournamentEntry& a,
                                   const TournamentEntry& b, int games, int opening,
                                   std::uint64_t seed) {
  check_compatible({a, b}, env);
  TournamentResult r{a.id, b.id, games, 0, 0, 0};
  for (int g = 0; g < games; ++g) {
    const std::uint64_t opening_seed = seed * 1000003u + static_cast<std::uint64_t>(g / 2);
    const bool a_first = g % 2 == 0;
    std::array<Policy, 2> policies;
    for (PlayerRole role : kRoles) {
      std::seed_seq seq{static_cast<std::uint32_t>(opening_seed),
                        static_cast<std::uint32_t>(opening_seed >> 32),
                        static_cast<std::uint32_t>(index(role))};
      const bool is_a = (role == PlayerRole::First) == a_first;
      policies[index(role)] = tournament_detail::opening_then_greedy(
          is_a ? a : b, opening, std::make_shared<Rng>(seq));
    }
    const auto trace = run_episode(env, opening_seed, static_cast<std::uint64_t>(g), policies);
    const auto res = result_for(trace.final_outcome, a_first ? PlayerRole::First : PlayerRole::Second);
    if (res == MatchResult::Win) ++r.wins_a;
    else if (res == MatchResult::Loss) ++r.wins_b;
    else ++r.draws;
  }
  return r;
}

/// Every unordered pair once, in input order.
inline std::vector<TournamentResult> run_tournament(const std::vector<TournamentEntry>& entries,
                                                    Environment& env,
                                                    const TournamentConfig& cfg) {
  if (entries.size() < 2) {
    throw Error(Errc::IncompatibleCheckpoints, "a tournament needs at least two checkpoints");
  }
  if (cfg.games_per_pair < 1 || cfg.opening_decisions < 0) {
    throw Error(Errc::ConfigInvalid, "games_per_pair >= 1 and opening_decisions >= 0");
  }
  check_compatible(entries, env);
  std::vector<TournamentResult> out;
  std::uint64_t pair = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (std::size_t j = i + 1; j < entries.size(); ++j) {
      out.push_back(play_match(env, entries[i], entries[j], cfg.games_per_pair,
                               cfg.opening_decisions, cfg.seed * 7919u + pair++));
    }
  }
  return out;
}

inline void write_tournament(std::ostream& out, const std::vector<TournamentResult>& results) {
  out << "player_a,player_b,games,wins_a,wins_b,draws,win_rate_a,win_rate_b\n";
  out << std::setprecision(6) << std::fixed;
  for (const auto& r : results) {
    out << r.a << ',' << r.b << ',' << r.games << ',' << r.wins_a << ',' << r.wins_b << ','
        << r.draws << ',' << r.win_rate_a() << ',' << r.win_rate_b() << '\n';
  }
}

inline std::shared_ptr<const Agent> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open checkpoint " + path.string());
  return std::make_shared<const Agent>(Agent::restore(in).checkpoint());
}

}  // namespace mmx
