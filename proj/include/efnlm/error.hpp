#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace efnlm {

enum class ErrorCode {
  DomainError,
  DimensionMismatch,
  NotPositiveDefinite,
  NotSymmetric,
  NoConvergence,
  RankDeficient,
  DegenerateResiduals,
  NonPositiveVariance,
  UnsupportedFamily,
  DegenerateSample,
  ConfigError,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this type; the code drives the
// CLI exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace efnlm
