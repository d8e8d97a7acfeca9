#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hvil {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kMalformedHeader,
  kDimensionMismatch,
  kDuplicateId,
  kNonFinite,
  kNotFound,
  kNotPositiveDefinite,
  kNumericalBlowup,
  kRankOutOfRange,
  kOutOfWindow,
  kBudgetExhausted,
  kProbeClosed,
  kStaleToken,
  kDegenerateInput,
};

std::string_view to_string(ErrorCode code);

// Every failure the library reports carries a machine-readable code so the
// HTTP layer and the CLI can map it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hvil
