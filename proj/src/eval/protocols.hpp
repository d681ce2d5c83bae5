// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "eval/metrics.hpp"
#include "features/features.hpp"
#include "fusion/train.hpp"

namespace depscreen {

// Everything an evaluation protocol consumes: per-interview features (with
// labels) and the text-branch verdict bit of each interview.
struct EvalCorpus {
  std::vector<InterviewFeatures> interviews;
  std::map<int, int> llm_verdicts;  // interview id -> 0/1

  const InterviewFeatures& interview(int id) const;
  std::vector<int> ids() const;
  // MFCC frames per segment; all segments must agree.
  int t_frames() const;
  int n_mfcc() const;
};

// Segments of the given interviews. Augmented variants are included only
// when requested; `flip_llm` inverts the verdict bit (ablation).
SegmentSet build_segment_set(const EvalCorpus& corpus, const std::vector<int>& ids, bool include_augmented,
                             bool flip_llm = false);

struct SplitDefinition {
  std::vector<int> train_ids;
  std::vector<int> validation_ids;
  std::vector<int> test_ids;

  // Pairwise disjoint, non-empty test split, exemplar ids absent from test.
  void validate(const std::set<int>& exemplar_ids = {}) const;
};

// Reads the split CSVs (first column is the participant id; a header row is
// skipped). File names are tried in order within `dir`.
SplitDefinition load_split(const std::filesystem::path& dir);
SplitDefinition load_split(const std::filesystem::path& train_csv, const std::filesystem::path& validation_csv,
                           const std::filesystem::path& test_csv);
void write_split_csv(const std::filesystem::path& path, const std::vector<int>& ids,
                     const std::map<int, std::pair<int, int>>& label_and_score);

struct EvalOptions {
  FusionHyperparams hyperparams;
  int max_epochs = 50;
  int patience = 3;
  std::uint64_t seed = 0;
  bool llm_flip_ablation = true;
  int workers = 1;
  std::function<void(const std::string&)> progress;
};

struct InterviewPrediction {
  int interview_id = 0;
  int label = -1;
  int llm = 0;
  std::size_t segments = 0;
  double confidence = 0.0;
  Label diagnosis = Label::kNotDepressed;
  Label majority = Label::kNotDepressed;
  std::optional<double> flipped_confidence;  // same model, text bit inverted
};

// What one trained model saw and what it was scored on.
struct FoldAudit {
  std::string fold;
  std::set<int> test_ids;
  std::set<int> training_ids;
  std::set<int> scaler_ids;
  std::set<int> validation_ids;
  std::size_t training_segments = 0;
  std::size_t augmented_training_segments = 0;
  std::size_t test_segments = 0;
  std::size_t augmented_test_segments = 0;
  int epochs_run = 0;

  // Test interviews found among training/scaler/validation inputs, plus a
  // description of any augmented test segment.
  std::vector<std::string> violations() const;
};

// Throws LeakageDetected listing every violation.
void enforce_audit(const FoldAudit& audit);

struct EvalReport {
  std::string protocol;
  ConfusionMatrix matrix;           // mean-probability rule
  ConfusionMatrix majority_matrix;  // segment majority vote
  std::optional<ConfusionMatrix> flipped_matrix;
  MetricSet metrics;
  std::vector<InterviewPrediction> predictions;  // ordered by interview id
  std::vector<FoldAudit> audits;
  std::vector<std::string> warnings;
  FusionHyperparams hyperparams;
  double seconds = 0.0;

  std::string to_text() const;
  nlohmann::json to_json() const;
  // report.txt, metrics.json, predictions.csv, audit.csv.
  void write(const std::filesystem::path& dir) const;
};

// One fresh model per interview, trained on every other interview's segments
// (augmented included) for a fixed epoch count and scored on the held-out
// interview's original segments.
EvalReport run_losocv(const EvalCorpus& corpus, const EvalOptions& options);

// Train on the train split (augmented included), early-stop on the
// validation split's original segments, score the test split.
EvalReport run_avec(const EvalCorpus& corpus, const SplitDefinition& split, const EvalOptions& options);

}  // namespace depscreen
