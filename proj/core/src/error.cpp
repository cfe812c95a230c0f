#include "vitalws/error.hpp"

namespace vitalws {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kMissingFile: return "missing_file";
    case ErrorCode::kMalformedRow: return "malformed_row";
    case ErrorCode::kFsMismatch: return "fs_mismatch";
    case ErrorCode::kDuplicateChannel: return "duplicate_channel";
    case ErrorCode::kBadManifest: return "bad_manifest";
    case ErrorCode::kUnknownChannel: return "unknown_channel";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kMissingTriggerChannel: return "missing_trigger_channel";
    case ErrorCode::kDuplicateName: return "duplicate_name";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kDiverged: return "diverged";
    case ErrorCode::kSingleClass: return "single_class";
    case ErrorCode::kSchemaMismatch: return "schema_mismatch";
    case ErrorCode::kTooFewPatients: return "too_few_patients";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kConfig: return "config";
  }
  return "unknown";
}

Error::Error(ErrorCode code, std::string message, std::string context)
    : std::runtime_error(context.empty() ? message : message + " [" + context + "]"),
      code_(code),
      context_(std::move(context)) {}

}  // namespace vitalws
