// SPDX-License-Identifier: Apache-2.0
#include "app/deployment.hpp"

namespace depscreen {

JobState job_state_for(Stage s) {
  switch (s) {
    case Stage::kPreprocessing: return JobState::kPreprocessing;
    case Stage::kFeatures: return JobState::kFeatures;
    case Stage::kLlm: return JobState::kLlm;
    case Stage::kInference: return JobState::kInference;
    case Stage::kReporting: return JobState::kReporting;
  }
  return JobState::kFailed;
}

JobProcessor recording_processor(std::shared_ptr<FusionModel> model, std::shared_ptr<const PipelineContext> ctx) {
  return [model = std::move(model), ctx = std::move(ctx)](const InferenceJob& job, const std::string& report_id,
                                                           const StageAdvance& advance) {
    return process_recording(job.recording_path, job.interview_id, *model, *ctx, report_id,
                             [&](Stage s) { advance(job_state_for(s)); })
        .report;
  };
}

}  // namespace depscreen
