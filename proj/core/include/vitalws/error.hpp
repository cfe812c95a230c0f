#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vitalws {

enum class ErrorCode {
  kMissingFile,
  kMalformedRow,
  kFsMismatch,
  kDuplicateChannel,
  kBadManifest,
  kUnknownChannel,
  kInvalidArgument,
  kMissingTriggerChannel,
  kDuplicateName,
  kEmptyInput,
  kDiverged,
  kSingleClass,
  kSchemaMismatch,
  kTooFewPatients,
  kIo,
  kConfig,
};

/// Stable snake_case name, used in machine-readable CLI errors.
std::string_view error_code_name(ErrorCode code) noexcept;

/// All library failures are reported through this exception. `context()`
/// carries the offending channel, fold or arm when one is known.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string context = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& context() const noexcept { return context_; }

 private:
  ErrorCode code_;
  std::string context_;
};

}  // namespace vitalws
