// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>

#include "app/pipeline.hpp"
#include "app/service.hpp"

namespace depscreen {

JobState job_state_for(Stage s);

// Job processor running process_recording on the job's local recording path.
// Stage failures surface as "<stage>: <message>" in the job record.
JobProcessor recording_processor(std::shared_ptr<FusionModel> model, std::shared_ptr<const PipelineContext> ctx);

}  // namespace depscreen
