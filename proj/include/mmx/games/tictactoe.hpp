#pragma once

#include <array>
#include <cstdint>

#include "mmx/games/board.hpp"

namespace mmx {

struct TicTacToeState {
  std::array<Cell, 9> cells{};
  PlayerRole to_move = PlayerRole::First;

  bool operator==(const TicTacToeState&) const = default;
};

namespace detail {
inline constexpr std::array<std::array<int, 3>, 8> kTicTacToeLines{{
    {0, 1, 2}, {3, 4, 5}, {6, 7, 8},  // rows
    {0, 3, 6}, {1, 4, 7}, {2, 5, 8},  // columns
    {0, 4, 8}, {2, 4, 6},             // diagonals
}};
}  // namespace detail

/// Classifies a position; throws InvalidState for unreachable boards.
inline GameOutcome tictactoe_outcome(const TicTacToeState& s) {
  const auto [x, o] = board::counts(s.cells);
  if (x - o != 0 && x - o != 1) throw Error(Errc::InvalidState, "piece counts out of balance");
  const PlayerRole expected = x == o ? PlayerRole::First : PlayerRole::Second;
  if (s.to_move != expected) throw Error(Errc::InvalidState, "to_move disagrees with piece counts");

  bool x_line = false;
  bool o_line = false;
  for (const auto& line : detail::kTicTacToeLines) {
    const Cell c = s.cells[line[0]];
    if (c != Cell::Empty && c == s.cells[line[1]] && c == s.cells[line[2]]) {
      (c == Cell::First ? x_line : o_line) = true;
    }
  }
  if (x_line && o_line) throw Error(Errc::InvalidState, "both players have a line");
  // The winner must have made the last move.
  if (x_line) {
    if (x != o + 1) throw Error(Errc::InvalidState, "X line but O moved last");
    return GameOutcome::FirstWins;
  }
  if (o_line) {
    if (x != o) throw Error(Errc::InvalidState, "O line but X moved last");
    return GameOutcome::SecondWins;
  }
  return x + o == 9 ? GameOutcome::Draw : GameOutcome::Ongoing;
}

struct TicTacToe {
  using State = TicTacToeState;
  static constexpr std::string_view kId = "tictactoe";
  static constexpr int kNumActions = 9;
  static constexpr int kNumCells = 9;

  static State initial() { return {}; }
  static GameOutcome outcome(const State& s) { return tictactoe_outcome(s); }
  static bool is_legal(const State& s, int a) {
    return a >= 0 && a < 9 && s.cells[a] == Cell::Empty;
  }
  static State apply(State s, int a) {
    s.cells[a] = stone(s.to_move);
    s.to_move = opponent(s.to_move);
    return s;
  }
  static PlayerRole to_move(const State& s) { return s.to_move; }
  static const std::array<Cell, 9>& cells(const State& s) { return s.cells; }
  static State decode(const Observation& obs) {
    auto [cells, viewer] = board::decode<9>(obs);
    return {cells, viewer};
  }
  /// Base-3 encoding; side to move is implied by the piece counts.
  static std::uint32_t key(const State& s) {
    std::uint32_t k = 0;
    for (Cell c : s.cells) k = k * 3 + static_cast<std::uint32_t>(c);
    return k;
  }
};

using TicTacToeEnv = TurnBasedEnv<TicTacToe>;

}  // namespace mmx
