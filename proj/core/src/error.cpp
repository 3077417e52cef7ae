#include "bcr/error.hpp"

namespace bcr {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidSymbol: return "invalid-symbol";
    case ErrorCode::kUnmappedHistory: return "unmapped-history";
    case ErrorCode::kInvalidParameter: return "invalid-parameter";
    case ErrorCode::kInvalidDistribution: return "invalid-distribution";
    case ErrorCode::kIncompleteTable: return "incomplete-table";
    case ErrorCode::kInvalidPrior: return "invalid-prior";
    case ErrorCode::kImpossibleObservation: return "impossible-observation";
    case ErrorCode::kUnknownMode: return "unknown-mode";
    case ErrorCode::kIndeterminateIncrement: return "indeterminate-increment";
    case ErrorCode::kNoPartition: return "no-partition";
    case ErrorCode::kParseError: return "parse-error";
    case ErrorCode::kSchemaViolation: return "schema-violation";
    case ErrorCode::kDanglingReference: return "dangling-reference";
    case ErrorCode::kUnknownScenario: return "unknown-scenario";
    case ErrorCode::kIo: return "io-error";
  }
  return "unknown-error";
}

}  // namespace bcr
