// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "corpus/types.hpp"
#include "fusion/model.hpp"

namespace depscreen {

struct ClassWeights {
  double negative = 1.0;
  double positive = 1.0;
};

// w_c = N / (2 N_c). Throws SingleClass when a class is absent.
ClassWeights class_weights(const std::vector<int>& labels);

// Mean over the batch of w_y * BCE(sigmoid(z), y), computed from logits.
double weighted_bce(const Eigen::VectorXd& logits, const std::vector<double>& labels, const ClassWeights& w);
// d(weighted_bce)/d(logits).
Eigen::VectorXd weighted_bce_gradient(const Eigen::VectorXd& logits, const std::vector<double>& labels,
                                      const ClassWeights& w);

// Adam with bias correction folded into the step size (Keras form).
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-7)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}
  void step(const std::vector<Param*>& params);
  long iterations() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

// Stops once the monitored loss has not improved for `patience` consecutive
// epochs.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}
  // Feeds one epoch's loss; returns true when training should stop now.
  bool update(double loss);
  int best_epoch() const { return best_epoch_; }  // 1-based, 0 before any update
  double best_loss() const { return best_; }
  int epochs_seen() const { return seen_; }

 private:
  int patience_;
  int seen_ = 0;
  int wait_ = 0;
  int best_epoch_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

// One training or evaluation example: a segment variant plus its
// interview's text-branch verdict.
struct SegmentExample {
  int interview_id = 0;
  int segment_index = 0;
  std::string tag;
  int label = -1;
  double llm = 0.0;
  std::shared_ptr<const RowMatrix> mfcc;
  std::shared_ptr<const RowMatrix> fau;

  bool original() const { return tag == "orig"; }
};
using SegmentSet = std::vector<SegmentExample>;

SegmentBatch make_batch(const SegmentSet& set, const std::vector<std::size_t>& indices);
// Throws Validation if an interview carries two different text verdicts.
void check_llm_consistency(const SegmentSet& set);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double val_accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  bool stopped_early = false;
  std::string to_csv() const;
};

// What a training run actually consumed, for leakage audits.
struct TrainAudit {
  std::set<int> training_ids;
  std::set<int> scaler_ids;
  std::set<int> validation_ids;
  std::size_t training_segments = 0;
  std::size_t augmented_segments = 0;
};

struct TrainOptions {
  int max_epochs = 50;
  int patience = 3;
  std::uint64_t seed = 0;
  bool fit_fau_scaler = true;
  std::function<void(const EpochRecord&)> on_epoch;
  // Returning true ends training after that epoch (e.g. a target accuracy).
  std::function<bool(const EpochRecord&)> stop_when;
};

struct TrainResult {
  TrainHistory history;
  TrainAudit audit;
  ClassWeights weights;
};

// Adam on the class-weighted loss. With a validation set, early-stops on
// unweighted validation loss and restores the best weights; without one,
// runs max_epochs.
TrainResult train(FusionModel& model, const SegmentSet& train_set, const SegmentSet* val_set,
                  const ClassWeights& weights, const TrainOptions& options);

struct LossAndAccuracy {
  double loss = 0.0;
  double accuracy = 0.0;
};
LossAndAccuracy evaluate(FusionModel& model, const SegmentSet& set, const ClassWeights& weights = {});

// Inference-mode sigmoid outputs, in set order.
std::vector<double> predict_segments(FusionModel& model, const SegmentSet& set);

struct InterviewDecision {
  Label diagnosis = Label::kNotDepressed;  // mean probability >= 0.5
  double confidence = 0.0;                 // mean probability
  Label majority = Label::kNotDepressed;   // at least half the segments >= 0.5
};
InterviewDecision aggregate_interview(const std::vector<double>& probabilities);

}  // namespace depscreen
