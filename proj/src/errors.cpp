#include "thot/errors.hpp"

namespace thot {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kEmptyQuery: return "EmptyQuery";
    case ErrorCode::kPhaseError: return "PhaseError";
    case ErrorCode::kUnsupportedCombination: return "UnsupportedCombination";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kRateLimited: return "RateLimited";
    case ErrorCode::kAuthMissing: return "AuthMissing";
    case ErrorCode::kMalformedResponse: return "MalformedResponse";
    case ErrorCode::kTransport: return "Transport";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kSampleTooLarge: return "SampleTooLarge";
    case ErrorCode::kNoGoldPassage: return "NoGoldPassage";
    case ErrorCode::kMultipleGoldPassages: return "MultipleGoldPassages";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kPrecondition: return "PreconditionError";
    case ErrorCode::kEmptyGold: return "EmptyGold";
    case ErrorCode::kEmptyOutcomes: return "EmptyOutcomes";
    case ErrorCode::kMissingTemplate: return "MissingTemplate";
    case ErrorCode::kMissingResponse: return "MissingResponse";
    case ErrorCode::kUnparseableJudgeOutput: return "UnparseableJudgeOutput";
    case ErrorCode::kEmptyLedger: return "EmptyLedger";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace thot
