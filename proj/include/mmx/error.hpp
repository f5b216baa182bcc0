#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmx {

/// Machine-readable failure categories. The CLI prints these verbatim.
enum class Errc {
  IllegalAction,
  MissingAction,
  NotYourTurn,
  IncompleteTrace,
  InvalidState,
  TerminalState,
  DimensionMismatch,
  NonFiniteGradient,
  NoLegalAction,
  BufferTooSmall,
  FormatVersionMismatch,
  FrozenModel,
  NonFiniteInput,
  EpisodeMismatch,
  UnsortedTrace,
  MissingPairing,
  EmptyPool,
  UnknownOpponent,
  NotReady,
  InconsistentEvent,
  ConfigInvalid,
  EnvironmentUnknown,
  IncompatibleCheckpoints,
  MisalignedGrids,
  Io,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::IllegalAction: return "IllegalAction";
    case Errc::MissingAction: return "MissingAction";
    case Errc::NotYourTurn: return "NotYourTurn";
    case Errc::IncompleteTrace: return "IncompleteTrace";
    case Errc::InvalidState: return "InvalidState";
    case Errc::TerminalState: return "TerminalState";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NonFiniteGradient: return "NonFiniteGradient";
    case Errc::NoLegalAction: return "NoLegalAction";
    case Errc::BufferTooSmall: return "BufferTooSmall";
    case Errc::FormatVersionMismatch: return "FormatVersionMismatch";
    case Errc::FrozenModel: return "FrozenModel";
    case Errc::NonFiniteInput: return "NonFiniteInput";
    case Errc::EpisodeMismatch: return "EpisodeMismatch";
    case Errc::UnsortedTrace: return "UnsortedTrace";
    case Errc::MissingPairing: return "MissingPairing";
    case Errc::EmptyPool: return "EmptyPool";
    case Errc::UnknownOpponent: return "UnknownOpponent";
    case Errc::NotReady: return "NotReady";
    case Errc::InconsistentEvent: return "InconsistentEvent";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::EnvironmentUnknown: return "EnvironmentUnknown";
    case Errc::IncompatibleCheckpoints: return "IncompatibleCheckpoints";
    case Errc::MisalignedGrids: return "MisalignedGrids";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace mmx
