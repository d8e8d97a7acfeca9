#include "hvil/error.hpp"

namespace hvil {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kMalformedHeader: return "malformed_header";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kDuplicateId: return "duplicate_id";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kNotPositiveDefinite: return "not_positive_definite";
    case ErrorCode::kNumericalBlowup: return "numerical_blowup";
    case ErrorCode::kRankOutOfRange: return "rank_out_of_range";
    case ErrorCode::kOutOfWindow: return "out_of_window";
    case ErrorCode::kBudgetExhausted: return "budget_exhausted";
    case ErrorCode::kProbeClosed: return "probe_closed";
    case ErrorCode::kStaleToken: return "stale_token";
    case ErrorCode::kDegenerateInput: return "degenerate_input";
  }
  return "unknown";
}

}  // namespace hvil
