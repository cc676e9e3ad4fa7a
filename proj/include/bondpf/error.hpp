#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bondpf {

enum class ErrorCode {
  DimensionMismatch,
  NotPositiveSemiDefinite,
  NonPositiveParameter,
  InvalidPrior,
  WrongSpreadMode,
  WrongDimension,
  EmptyInterval,
  DegenerateBoth,
  NonMonotoneTime,
  AllWeightsZero,
  UnknownBond,
  TimeInPast,
  HistoryDisabled,
  InvalidArgument,
  InsufficientData,
  NoOverlap,
  MissingSpreads,
  InvalidConfig,
  Parse,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct Violation {
  ErrorCode code;
  std::string field;
  std::string message;
};

/// Raised by model validation; carries every violation found, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Violation> violations);

  [[nodiscard]] const std::vector<Violation>& violations() const noexcept { return violations_; }
  [[nodiscard]] bool has(ErrorCode code) const noexcept;

 private:
  std::vector<Violation> violations_;
};

}  // namespace bondpf
