#include "activerank/types.hpp"

namespace activerank {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::parse: return "parse";
    case ErrorCode::io: return "io";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::duplicate_id: return "duplicate_id";
    case ErrorCode::zero_vector: return "zero_vector";
    case ErrorCode::numerical: return "numerical";
    case ErrorCode::budget_exhausted: return "budget_exhausted";
    case ErrorCode::oracle_transport: return "oracle_transport";
    case ErrorCode::oracle_format: return "oracle_format";
    case ErrorCode::empty_pool: return "empty_pool";
    case ErrorCode::missing_query: return "missing_query";
  }
  return "unknown";
}

}  // namespace activerank
