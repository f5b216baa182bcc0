#pragma once

#include <array>
#include <vector>

#include "mmx/games/board.hpp"

namespace mmx {

/// 6x7 grid, row-major with row 0 at the bottom: cell index = row * 7 + col.
struct Connect4State {
  static constexpr int kRows = 6;
  static constexpr int kCols = 7;

  std::array<Cell, kRows * kCols> grid{};
  PlayerRole to_move = PlayerRole::First;

  Cell at(int row, int col) const { return grid[row * kCols + col]; }
  bool operator==(const Connect4State&) const = default;
};

namespace detail {

// Every window of four cells: horizontal, vertical and both diagonals.
inline const std::vector<std::array<int, 4>>& connect4_windows() {
  static const std::vector<std::array<int, 4>> windows = [] {
    constexpr int R = Connect4State::kRows;
    constexpr int C = Connect4State::kCols;
    std::vector<std::array<int, 4>> w;
    const int dirs[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
    for (int r = 0; r < R; ++r) {
      for (int c = 0; c < C; ++c) {
        for (const auto& d : dirs) {
          const int er = r + 3 * d[0];
          const int ec = c + 3 * d[1];
          if (er < 0 || er >= R || ec < 0 || ec >= C) continue;
          w.push_back({r * C + c, (r + d[0]) * C + c + d[1], (r + 2 * d[0]) * C + c + 2 * d[1],
                       er * C + ec});
        }
      }
    }
    return w;
  }();
  return windows;
}

}  // namespace detail

inline GameOutcome connect4_outcome(const Connect4State& s) {
  constexpr int R = Connect4State::kRows;
  constexpr int C = Connect4State::kCols;
  const auto [p1, p2] = board::counts(s.grid);
  if (p1 - p2 != 0 && p1 - p2 != 1) throw Error(Errc::InvalidState, "piece counts out of balance");
  const PlayerRole expected = p1 == p2 ? PlayerRole::First : PlayerRole::Second;
  if (s.to_move != expected) throw Error(Errc::InvalidState, "to_move disagrees with piece counts");
  for (int c = 0; c < C; ++c) {
    for (int r = 1; r < R; ++r) {
      if (s.at(r, c) != Cell::Empty && s.at(r - 1, c) == Cell::Empty) {
        throw Error(Errc::InvalidState, "floating piece in column " + std::to_string(c));
      }
    }
  }

  bool p1_four = false;
  bool p2_four = false;
  for (const auto& w : detail::connect4_windows()) {
    const Cell c = s.grid[w[0]];
    if (c != Cell::Empty && c == s.grid[w[1]] && c == s.grid[w[2]] && c == s.grid[w[3]]) {
      (c == Cell::First ? p1_four : p2_four) = true;
    }
  }
  if (p1_four && p2_four) throw Error(Errc::InvalidState, "both players have four in a row");
  if (p1_four) return GameOutcome::FirstWins;
  if (p2_four) return GameOutcome::SecondWins;
  return p1 + p2 == R * C ? GameOutcome::Draw : GameOutcome::Ongoing;
}

struct Connect4 {
  using State = Connect4State;
  static constexpr std::string_view kId = "connect4";
  static constexpr int kNumActions = State::kCols;
  static constexpr int kNumCells = State::kRows * State::kCols;

  static State initial() { return {}; }
  static GameOutcome outcome(const State& s) { return connect4_outcome(s); }
  static bool is_legal(const State& s, int col) {
    return col >= 0 && col < State::kCols && s.at(State::kRows - 1, col) == Cell::Empty;
  }
  static State apply(State s, int col) {
    for (int r = 0; r < State::kRows; ++r) {
      if (s.grid[r * State::kCols + col] == Cell::Empty) {
        s.grid[r * State::kCols + col] = stone(s.to_move);
        break;
      }
    }
    s.to_move = opponent(s.to_move);
    return s;
  }
  static PlayerRole to_move(const State& s) { return s.to_move; }
  static const std::array<Cell, kNumCells>& cells(const State& s) { return s.grid; }
  static State decode(const Observation& obs) {
    auto [cells, viewer] = board::decode<kNumCells>(obs);
    return {cells, viewer};
  }
};

using Connect4Env = TurnBasedEnv<Connect4>;

}  // namespace mmx
