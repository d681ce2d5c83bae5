// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace depscreen {

// Error kinds raised by the core. The C API maps these one-to-one onto
// ds_status codes, so the numeric values are part of the ABI.
enum class ErrorCode : int {
  kMissingFile = 1,
  kMalformedCsv,
  kSampleRateMismatch,
  kIntervalOutOfRange,
  kInconsistentOverride,
  kInvalidFraction,
  kUnknownSpeaker,
  kNoPatientSpeech,
  kTooShort,
  kTooFewFrames,
  kAlignmentGap,
  kEmptyTrainingSet,
  kUnbalancedExemplars,
  kValidation,
  kBackendUnavailable,
  kMalformedAfterRetries,
  kAuthFailure,
  kShapeMismatch,
  kSingleClass,
  kLeakageDetected,
  kNonFiniteLoss,
  kEmptyInput,
  kEmptySpace,
  kDegenerateDenominator,
  kMissingFeatures,
  kInsufficientCorpus,
  kInvalidSignature,
  kMalformedPayload,
  kQueueFull,
  kNotFound,
  kIo,
  kInvalidArgument,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  // what() without the leading code name.
  std::string message() const {
    const std::string prefix = std::string(error_code_name(code_)) + ": ";
    const std::string w = what();
    return w.rfind(prefix, 0) == 0 ? w.substr(prefix.size()) : w;
  }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace depscreen
