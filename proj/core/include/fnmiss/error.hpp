#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fnmiss {

enum class ErrorCode {
  DimensionMismatch,
  InvalidGrid,
  NonBinaryIndicator,
  NonFiniteObservedOutcome,
  NonFiniteCovariate,
  TooFewObserved,
  SingularDesign,
  InsufficientObserved,
  Separation,
  AllSameIndicator,
  SingularPi,
  ZeroVarianceDiagonal,
  LevelOutOfRange,
  BadPartition,
  NonPSD,
  InvalidConfig,
  FailureRateExceeded,
  Schema,
};

std::string_view to_string(ErrorCode code) noexcept;

// All library failures are reported through this type; code() identifies the
// contract that was violated and what() carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fnmiss
