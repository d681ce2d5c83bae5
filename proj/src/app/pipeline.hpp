// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "app/config.hpp"
#include "common/error.hpp"
#include "corpus/manifest.hpp"
#include "eval/protocols.hpp"
#include "fusion/model.hpp"
#include "llm/llm.hpp"
#include "transcript/transcript.hpp"

namespace depscreen {

std::shared_ptr<LlmBackend> make_backend(const LlmSettings& settings);

// Shared, read-only resources for every pipeline stage.
struct PipelineContext {
  AppConfig config;
  AcronymTable acronyms;
  ErrorManifest manifest;
  std::vector<Exemplar> exemplars;
  std::shared_ptr<LlmClassifier> classifier;
};

// Resolves the acronym table, error manifest and exemplar directory
// (config paths first, then files under corpus_root, then the shipped data)
// and builds the LLM classifier. Exemplars are optional until classification.
PipelineContext make_context(const AppConfig& config, const std::filesystem::path& corpus_root,
                             std::shared_ptr<LlmBackend> backend = nullptr);

// A repaired interview (raw utterance rows, used for timing) with its
// normalized dialogue (used for the text branch).
struct PreparedInterview {
  Interview interview;
  std::string dialogue;
};

PreparedInterview prepare_interview(const Interview& raw, const PipelineContext& ctx);
// Every <id>_P interview under root, ascending by id.
std::vector<PreparedInterview> prepare_corpus(const std::filesystem::path& root, const PipelineContext& ctx,
                                              bool require_labels = true);
// Corpus layout of the repaired interviews plus <id>_P/<id>_DIALOGUE.txt.
void write_prepared(const std::filesystem::path& out, const std::vector<PreparedInterview>& prepared,
                    const std::filesystem::path& exemplar_source = {});

std::vector<InterviewFeatures> extract_corpus_features(const std::vector<PreparedInterview>& prepared,
                                                       const FeatureConfig& cfg, std::uint64_t seed);

std::map<int, LlmVerdict> classify_interviews(const std::vector<PreparedInterview>& prepared,
                                              const PipelineContext& ctx);
// interview_id,diagnosis,backend,cached,malformed_retries
void write_verdicts(const std::filesystem::path& path, const std::map<int, LlmVerdict>& verdicts);
std::map<int, int> read_verdicts(const std::filesystem::path& path);
std::map<int, int> verdict_bits(const std::map<int, LlmVerdict>& verdicts);

EvalCorpus make_eval_corpus(std::vector<InterviewFeatures> features, const std::map<int, int>& verdicts);

// Trains one model on every segment of the corpus (no validation split).
std::unique_ptr<FusionModel> train_full_model(const EvalCorpus& corpus, const FusionHyperparams& h, int epochs,
                                              std::uint64_t seed, TrainHistory* history = nullptr);

enum class Stage { kPreprocessing, kFeatures, kLlm, kInference, kReporting };
const char* stage_name(Stage s);

struct StageTimings {
  double preprocessing = 0.0;
  double features = 0.0;
  double llm = 0.0;
  double inference = 0.0;
  double reporting = 0.0;
  double total = 0.0;
};

struct RecordingResult {
  ClinicalReport report;
  InterviewDecision decision;
  LlmVerdict verdict;
  std::size_t segments = 0;
  StageTimings timings;
};

// Thrown by process_recording; carries the stage that failed.
class StageError : public Error {
 public:
  StageError(Stage stage, const Error& cause)
      : Error(cause.code(), std::string(stage_name(stage)) + ": " + cause.message()), stage_(stage) {}
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

// Locates <id>_P under `source` (a corpus root or the interview directory
// itself).
std::filesystem::path resolve_recording_root(const std::filesystem::path& source, int interview_id);

// Load and repair -> normalize -> segment/MFCC/FAU (no augmentation) -> LLM
// verdict -> fusion inference -> aggregate -> clinical report. The report's
// diagnosis and confidence come from the fusion model.
RecordingResult process_recording(const std::filesystem::path& source, int interview_id, FusionModel& model,
                                  const PipelineContext& ctx, const std::string& report_id,
                                  const std::function<void(Stage)>& on_stage = {});

}  // namespace depscreen
