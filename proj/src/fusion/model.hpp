// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "common/matrix.hpp"
#include "common/random.hpp"
#include "fusion/hyperparams.hpp"
#include "fusion/layers.hpp"
#include "visualfeat/fau.hpp"

namespace depscreen {

inline constexpr int kFauFlatWidth = static_cast<int>(kFauSegmentRows) * kFauColumns;  // 4800

// B segments. mfcc[b] is [T x n_mfcc], fau[b] is the raw [240 x 20] block,
// llm[b] the interview's text-branch verdict bit.
struct SegmentBatch {
  std::vector<std::shared_ptr<const RowMatrix>> mfcc;
  std::vector<std::shared_ptr<const RowMatrix>> fau;
  std::vector<double> llm;
  std::vector<double> labels;
  std::vector<int> interview_ids;

  std::size_t size() const { return mfcc.size(); }
};

struct TensorShape {
  long rows = 0;
  long cols = 0;
  bool operator==(const TensorShape&) const = default;
};

// Per-example widths of the intermediate tensors, as observed on the last
// forward pass.
struct ShapeReport {
  TensorShape mfcc_branch;
  TensorShape fau_projection;
  TensorShape first_concat;
  TensorShape fusion;
  TensorShape llm_projection;
  TensorShape second_concat;
  TensorShape head_input;
};

class FusionModel {
 public:
  FusionModel(const FusionHyperparams& h, int t_frames, std::uint64_t seed, int n_mfcc = 60);

  FusionModel(const FusionModel&) = delete;
  FusionModel& operator=(const FusionModel&) = delete;

  const FusionHyperparams& hyperparams() const { return h_; }
  int t_frames() const { return t_frames_; }
  int n_mfcc() const { return n_mfcc_; }

  // The FAU branch standardizes its raw input with this scaler; it is fit on
  // each training partition and saved with the checkpoint.
  void set_fau_scaler(const FauScaler& s) { scaler_ = s; }
  const FauScaler& fau_scaler() const { return scaler_; }

  // Logits [B]. Training mode applies dropout (rng required when any rate is
  // nonzero) and batch statistics; inference mode is deterministic.
  Eigen::VectorXd forward(const SegmentBatch& batch, bool training, Rng* rng = nullptr);

  // Backpropagates d(loss)/d(logits) from the last forward pass into the
  // parameter gradients.
  void backward(const Eigen::VectorXd& dlogits);

  // Sigmoid probabilities in inference mode. Safe to call concurrently.
  Eigen::VectorXd predict(const SegmentBatch& batch);

  std::vector<Param*> parameters();
  std::vector<Param*> state();
  void zero_grad();
  std::size_t parameter_count();

  // All trainable and non-trainable tensors, in a fixed order.
  std::vector<RowMatrix> snapshot();
  void restore(const std::vector<RowMatrix>& tensors);

  std::string checksum();
  const ShapeReport& last_shapes() const { return shapes_; }
  // Widths implied by the hyperparameters alone.
  ShapeReport expected_shapes() const;

  void save(const std::filesystem::path& path);
  static std::unique_ptr<FusionModel> load(const std::filesystem::path& path);

 private:
  std::vector<Param*> all_tensors();
  RowMatrix pack_mfcc(const SegmentBatch& batch) const;
  RowMatrix pack_fau(const SegmentBatch& batch) const;

  FusionHyperparams h_;
  int t_frames_;
  int n_mfcc_;
  std::uint64_t seed_;
  FauScaler scaler_;

  Rng init_rng_;
  BiLstm lstm1_, lstm2_, lstm3_;
  Dropout drop1_, drop2_, drop3_;
  BatchNorm bn1_, bn2_, bn3_;
  Dense fau_proj_;
  BiLstm fusion_lstm_;
  Dropout fusion_drop_;
  BatchNorm fusion_bn_;
  Dense llm_proj_;
  std::vector<Dense> head_;  // n_dense leaky layers, then the logit layer

  int B_ = 0;
  std::vector<RowMatrix> head_pre_;
  ShapeReport shapes_;
  std::mutex predict_mutex_;
};

}  // namespace depscreen
