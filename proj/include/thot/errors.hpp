#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace thot {

enum class ErrorCode {
  kInvalidArgument,
  kEmptyQuery,
  kPhaseError,
  kUnsupportedCombination,
  kTimeout,
  kRateLimited,
  kAuthMissing,
  kMalformedResponse,
  kTransport,
  kParseError,
  kSchemaError,
  kSampleTooLarge,
  kNoGoldPassage,
  kMultipleGoldPassages,
  kIndexOutOfRange,
  kPrecondition,
  kEmptyGold,
  kEmptyOutcomes,
  kMissingTemplate,
  kMissingResponse,
  kUnparseableJudgeOutput,
  kEmptyLedger,
  kConfig,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Every failure the library reports carries one of the codes above; callers
// branch on code(), the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace thot
