// SPDX-License-Identifier: Apache-2.0
#include "fusion/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "common/error.hpp"

namespace depscreen {
namespace {

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<std::vector<std::size_t>> batches_of(std::vector<std::size_t> order, int batch_size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(batch_size)) {
    out.emplace_back(order.begin() + static_cast<long>(i),
                     order.begin() + static_cast<long>(std::min(order.size(), i + static_cast<std::size_t>(batch_size))));
  }
  return out;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

ClassWeights class_weights(const std::vector<int>& labels) {
  double pos = 0, neg = 0;
  for (int l : labels) (l == 1 ? pos : neg) += 1.0;
  if (pos == 0 || neg == 0) fail(ErrorCode::kSingleClass, "class weights need both classes present");
  const double n = pos + neg;
  return ClassWeights{n / (2.0 * neg), n / (2.0 * pos)};
}

double weighted_bce(const Eigen::VectorXd& logits, const std::vector<double>& labels, const ClassWeights& w) {
  if (static_cast<std::size_t>(logits.size()) != labels.size() || labels.empty()) {
    fail(ErrorCode::kShapeMismatch, "logits and labels differ in length");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double y = labels[static_cast<std::size_t>(i)];
    const double wy = y > 0.5 ? w.positive : w.negative;
    total += wy * (softplus(logits(i)) - y * logits(i));
  }
  return total / static_cast<double>(labels.size());
}

Eigen::VectorXd weighted_bce_gradient(const Eigen::VectorXd& logits, const std::vector<double>& labels,
                                      const ClassWeights& w) {
  Eigen::VectorXd g(logits.size());
  const double n = static_cast<double>(labels.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double y = labels[static_cast<std::size_t>(i)];
    const double wy = y > 0.5 ? w.positive : w.negative;
    g(i) = wy * (sigmoid(logits(i)) - y) / n;
  }
  return g;
}

void Adam::step(const std::vector<Param*>& params) {
  ++t_;
  const double lr_t = lr_ * std::sqrt(1.0 - std::pow(beta2_, t_)) / (1.0 - std::pow(beta1_, t_));
  for (Param* p : params) {
    if (p->m.size() != p->value.size()) {
      p->m = RowMatrix::Zero(p->value.rows(), p->value.cols());
      p->v = RowMatrix::Zero(p->value.rows(), p->value.cols());
    }
    p->m = beta1_ * p->m + (1.0 - beta1_) * p->grad;
    p->v = beta2_ * p->v + (1.0 - beta2_) * p->grad.cwiseAbs2();
    p->value.array() -= lr_t * p->m.array() / (p->v.array().sqrt() + eps_);
  }
}

bool EarlyStopping::update(double loss) {
  ++seen_;
  if (loss < best_) {
    best_ = loss;
    best_epoch_ = seen_;
    wait_ = 0;
    return false;
  }
  return ++wait_ >= patience_;
}

SegmentBatch make_batch(const SegmentSet& set, const std::vector<std::size_t>& indices) {
  SegmentBatch b;
  for (std::size_t i : indices) {
    const SegmentExample& e = set.at(i);
    b.mfcc.push_back(e.mfcc);
    b.fau.push_back(e.fau);
    b.llm.push_back(e.llm);
    b.labels.push_back(static_cast<double>(e.label));
    b.interview_ids.push_back(e.interview_id);
  }
  return b;
}

void check_llm_consistency(const SegmentSet& set) {
  std::map<int, double> seen;
  for (const auto& e : set) {
    auto [it, fresh] = seen.emplace(e.interview_id, e.llm);
    if (!fresh && it->second != e.llm) {
      fail(ErrorCode::kValidation, "interview " + std::to_string(e.interview_id) + " has inconsistent text verdicts");
    }
  }
}

std::string TrainHistory::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.train_loss << ',' << e.train_accuracy << ',';
    if (!std::isnan(e.val_loss)) out << e.val_loss;
    out << ',';
    if (!std::isnan(e.val_accuracy)) out << e.val_accuracy;
    out << '\n';
  }
  return out.str();
}

LossAndAccuracy evaluate(FusionModel& model, const SegmentSet& set, const ClassWeights& weights) {
  if (set.empty()) fail(ErrorCode::kEmptyInput, "evaluation set is empty");
  double loss = 0.0, correct = 0.0;
  for (const auto& idx : batches_of(iota_indices(set.size()), model.hyperparams().batch_size)) {
    const SegmentBatch b = make_batch(set, idx);
    const Eigen::VectorXd z = model.forward(b, false);
    loss += weighted_bce(z, b.labels, weights) * static_cast<double>(idx.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) correct += ((z(i) >= 0.0) == (b.labels[i] > 0.5)) ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(set.size());
  return {loss / n, correct / n};
}

std::vector<double> predict_segments(FusionModel& model, const SegmentSet& set) {
  std::vector<double> out;
  out.reserve(set.size());
  for (const auto& idx : batches_of(iota_indices(set.size()), model.hyperparams().batch_size)) {
    const Eigen::VectorXd p = model.predict(make_batch(set, idx));
    out.insert(out.end(), p.data(), p.data() + p.size());
  }
  return out;
}

InterviewDecision aggregate_interview(const std::vector<double>& probabilities) {
  if (probabilities.empty()) fail(ErrorCode::kEmptyInput, "no segment probabilities to aggregate");
  double sum = 0.0;
  std::size_t votes = 0;
  for (double p : probabilities) {
    sum += p;
    if (p >= 0.5) ++votes;
  }
  InterviewDecision d;
  d.confidence = sum / static_cast<double>(probabilities.size());
  d.diagnosis = d.confidence >= 0.5 ? Label::kDepressed : Label::kNotDepressed;
  d.majority = 2 * votes >= probabilities.size() ? Label::kDepressed : Label::kNotDepressed;
  return d;
}

TrainResult train(FusionModel& model, const SegmentSet& train_set, const SegmentSet* val_set,
                  const ClassWeights& weights, const TrainOptions& options) {
  if (train_set.empty()) fail(ErrorCode::kEmptyTrainingSet, "training set is empty");
  TrainResult result;
  result.weights = weights;
  TrainAudit& audit = result.audit;
  for (const auto& e : train_set) {
    if (e.label != 0 && e.label != 1) fail(ErrorCode::kValidation, "training segment without a label");
    audit.training_ids.insert(e.interview_id);
    ++audit.training_segments;
    if (!e.original()) ++audit.augmented_segments;
  }
  check_llm_consistency(train_set);
  if (val_set != nullptr) {
    if (val_set->empty()) fail(ErrorCode::kValidation, "validation set is empty");
    for (const auto& e : *val_set) {
      if (audit.training_ids.count(e.interview_id) != 0) {
        fail(ErrorCode::kLeakageDetected,
             "interview " + std::to_string(e.interview_id) + " is in both training and validation sets");
      }
      if (!e.original()) fail(ErrorCode::kValidation, "augmented segment in validation set");
      audit.validation_ids.insert(e.interview_id);
    }
  }

  if (options.fit_fau_scaler) {
    // One FAU block per (interview, segment); augmented variants share it.
    std::map<std::pair<int, int>, const RowMatrix*> unique;
    for (const auto& e : train_set) unique.emplace(std::make_pair(e.interview_id, e.segment_index), e.fau.get());
    std::vector<FauMatrix> blocks;
    blocks.reserve(unique.size());
    for (const auto& [key, m] : unique) {
      blocks.push_back(FauMatrix{*m});
      audit.scaler_ids.insert(key.first);
    }
    model.set_fau_scaler(fit_fau_scaler(blocks));
  }

  Adam adam(model.hyperparams().learning_rate);
  EarlyStopping stopper(options.patience);
  std::vector<RowMatrix> best;
  const int batch_size = model.hyperparams().batch_size;
  for (int epoch = 1; epoch <= options.max_epochs; ++epoch) {
    Rng order_rng(derive_seed(options.seed, {0x5eed, static_cast<std::uint64_t>(epoch)}));
    Rng dropout_rng(derive_seed(options.seed, {0xd409, static_cast<std::uint64_t>(epoch)}));
    std::vector<std::size_t> order = iota_indices(train_set.size());
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(order_rng, i)]);

    double loss_sum = 0.0, correct = 0.0;
    for (const auto& idx : batches_of(order, batch_size)) {
      const SegmentBatch b = make_batch(train_set, idx);
      model.zero_grad();
      const Eigen::VectorXd z = model.forward(b, true, &dropout_rng);
      const double loss = weighted_bce(z, b.labels, weights);
      if (!std::isfinite(loss)) fail(ErrorCode::kNonFiniteLoss, "loss became non-finite at epoch " + std::to_string(epoch));
      model.backward(weighted_bce_gradient(z, b.labels, weights));
      adam.step(model.parameters());
      loss_sum += loss * static_cast<double>(idx.size());
      for (Eigen::Index i = 0; i < z.size(); ++i) correct += ((z(i) >= 0.0) == (b.labels[i] > 0.5)) ? 1.0 : 0.0;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    rec.train_accuracy = correct / static_cast<double>(train_set.size());
    bool stop = false;
    if (val_set != nullptr) {
      const LossAndAccuracy v = evaluate(model, *val_set);
      rec.val_loss = v.loss;
      rec.val_accuracy = v.accuracy;
      if (!std::isfinite(v.loss)) fail(ErrorCode::kNonFiniteLoss, "validation loss became non-finite");
      stop = stopper.update(v.loss);
      if (stopper.best_epoch() == epoch) best = model.snapshot();
    }
    result.history.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
    if (options.stop_when && options.stop_when(rec)) stop = true;
    if (stop) {
      result.history.stopped_early = epoch < options.max_epochs;
      break;
    }
  }
  if (val_set != nullptr && !best.empty()) {
    model.restore(best);
    result.history.best_epoch = stopper.best_epoch();
  } else {
    result.history.best_epoch = static_cast<int>(result.history.epochs.size());
  }
  return result;
}

}  // namespace depscreen
