#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bcr {

enum class ErrorCode {
  kInvalidSymbol,
  kUnmappedHistory,
  kInvalidParameter,
  kInvalidDistribution,
  kIncompleteTable,
  kInvalidPrior,
  kImpossibleObservation,
  kUnknownMode,
  kIndeterminateIncrement,
  kNoPartition,
  kParseError,
  kSchemaViolation,
  kDanglingReference,
  kUnknownScenario,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so
// callers (the CLI, the runner's per-seed abort logic) can branch on kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bcr
