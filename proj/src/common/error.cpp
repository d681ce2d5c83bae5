// SPDX-License-Identifier: Apache-2.0
#include "common/error.hpp"

namespace depscreen {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kMissingFile: return "MissingFile";
    case ErrorCode::kMalformedCsv: return "MalformedCsv";
    case ErrorCode::kSampleRateMismatch: return "SampleRateMismatch";
    case ErrorCode::kIntervalOutOfRange: return "IntervalOutOfRange";
    case ErrorCode::kInconsistentOverride: return "InconsistentOverride";
    case ErrorCode::kInvalidFraction: return "InvalidFraction";
    case ErrorCode::kUnknownSpeaker: return "UnknownSpeaker";
    case ErrorCode::kNoPatientSpeech: return "NoPatientSpeech";
    case ErrorCode::kTooShort: return "TooShort";
    case ErrorCode::kTooFewFrames: return "TooFewFrames";
    case ErrorCode::kAlignmentGap: return "AlignmentGap";
    case ErrorCode::kEmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::kUnbalancedExemplars: return "UnbalancedExemplars";
    case ErrorCode::kValidation: return "ValidationError";
    case ErrorCode::kBackendUnavailable: return "BackendUnavailable";
    case ErrorCode::kMalformedAfterRetries: return "MalformedAfterRetries";
    case ErrorCode::kAuthFailure: return "AuthFailure";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kSingleClass: return "SingleClass";
    case ErrorCode::kLeakageDetected: return "LeakageDetected";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kEmptySpace: return "EmptySpace";
    case ErrorCode::kDegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::kMissingFeatures: return "MissingFeatures";
    case ErrorCode::kInsufficientCorpus: return "InsufficientCorpus";
    case ErrorCode::kInvalidSignature: return "InvalidSignature";
    case ErrorCode::kMalformedPayload: return "MalformedPayload";
    case ErrorCode::kQueueFull: return "QueueFull";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace depscreen
