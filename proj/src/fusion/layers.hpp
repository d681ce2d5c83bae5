// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "common/matrix.hpp"
#include "common/random.hpp"

namespace depscreen {

// Trainable tensor with its gradient and Adam moments.
struct Param {
  std::string name;
  RowMatrix value;
  RowMatrix grad;
  RowMatrix m;
  RowMatrix v;

  Param() = default;
  Param(std::string n, RowMatrix init) : name(std::move(n)), value(std::move(init)) {
    grad = RowMatrix::Zero(value.rows(), value.cols());
  }
  void zero_grad() { grad.setZero(); }
};

RowMatrix glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng);
RowMatrix orthogonal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

// Sequence tensors are [T*B x F] with row t*B + b holding timestep t of
// example b.

// One direction of a Keras-style LSTM (gate order i, f, c, o; forget-gate
// bias initialized to 1), returning the full hidden sequence.
class LstmDirection {
 public:
  LstmDirection(const std::string& name, int in, int units, bool reverse, Rng& rng);

  RowMatrix forward(const RowMatrix& x, int T, int B);
  RowMatrix backward(const RowMatrix& dh);
  std::vector<Param*> params() { return {&W_, &U_, &b_}; }
  int units() const { return units_; }

 private:
  Param W_, U_, b_;
  int in_ = 0, units_ = 0;
  bool reverse_ = false;
  int T_ = 0, B_ = 0;
  RowMatrix x_, gates_, c_, tanh_c_, h_;
};

class BiLstm {
 public:
  BiLstm(const std::string& name, int in, int units, Rng& rng);
  RowMatrix forward(const RowMatrix& x, int T, int B);
  RowMatrix backward(const RowMatrix& dy);
  std::vector<Param*> params();
  int output_width() const { return 2 * fwd_.units(); }

 private:
  LstmDirection fwd_, bwd_;
};

// Inverted dropout; identity outside training or at rate 0.
class Dropout {
 public:
  explicit Dropout(double rate) : rate_(rate) {}
  RowMatrix forward(const RowMatrix& x, bool training, Rng* rng);
  RowMatrix backward(const RowMatrix& dy) const;

 private:
  double rate_;
  bool active_ = false;
  RowMatrix mask_;
};

// Per-feature normalization over all rows of the batch (examples and
// timesteps). Keras defaults: momentum 0.99, epsilon 1e-3.
class BatchNorm {
 public:
  BatchNorm(const std::string& name, int features);
  RowMatrix forward(const RowMatrix& x, bool training);
  RowMatrix backward(const RowMatrix& dy);
  std::vector<Param*> params() { return {&gamma_, &beta_}; }
  // Non-trainable state saved with the model.
  std::vector<Param*> state() { return {&running_mean_, &running_var_}; }

  static constexpr double kMomentum = 0.99;
  static constexpr double kEpsilon = 1e-3;

 private:
  Param gamma_, beta_, running_mean_, running_var_;
  RowMatrix xhat_;
  Eigen::RowVectorXd inv_std_;
};

class Dense {
 public:
  Dense(const std::string& name, int in, int out, Rng& rng);
  RowMatrix forward(const RowMatrix& x);
  RowMatrix backward(const RowMatrix& dy);
  std::vector<Param*> params() { return {&W_, &b_}; }
  int output_width() const { return static_cast<int>(W_.value.cols()); }

 private:
  Param W_, b_;
  RowMatrix x_;
};

// [B x D] -> [T*B x D], repeating each example's row at every timestep.
RowMatrix repeat_over_time(const RowMatrix& x, int T);
RowMatrix sum_over_time(const RowMatrix& dy, int T, int B);

// [T*B x D] <-> [B x T*D].
RowMatrix flatten_time(const RowMatrix& x, int T, int B);
RowMatrix unflatten_time(const RowMatrix& x, int T, int B);

}  // namespace depscreen
