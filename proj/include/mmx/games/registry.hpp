#pragma once

#include <array>
#include <memory>
#include <string>
#include <string_view>

#include "mmx/games/connect4.hpp"
#include "mmx/games/duelsim.hpp"
#include "mmx/games/tictactoe.hpp"

namespace mmx {

inline constexpr std::array<std::string_view, 3> kEnvironmentIds{"tictactoe", "connect4",
                                                                 "duelsim"};

inline std::unique_ptr<Environment> make_environment(std::string_view id) {
  if (id == "tictactoe") return std::make_unique<TicTacToeEnv>();
  if (id == "connect4") return std::make_unique<Connect4Env>();
  if (id == "duelsim") return std::make_unique<DuelSimEnv>();
  throw Error(Errc::EnvironmentUnknown, "no environment registered as '" + std::string(id) + "'");
}

}  // namespace mmx
