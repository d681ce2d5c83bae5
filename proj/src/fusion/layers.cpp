// SPDX-License-Identifier: Apache-2.0
#include "fusion/layers.hpp"

#include <Eigen/QR>
#include <cmath>

namespace depscreen {
namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

RowMatrix glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  RowMatrix w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -limit, limit);
  return w;
}

RowMatrix orthogonal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const Eigen::Index n = std::max(rows, cols), k = std::min(rows, cols);
  Eigen::MatrixXd a(n, k);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = gaussian(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  RowMatrix out = rows >= cols ? RowMatrix(q) : RowMatrix(q.transpose());
  return out;
}

LstmDirection::LstmDirection(const std::string& name, int in, int units, bool reverse, Rng& rng)
    : in_(in), units_(units), reverse_(reverse) {
  W_ = Param(name + ".kernel", glorot_uniform(in, 4 * units, rng));
  U_ = Param(name + ".recurrent_kernel", orthogonal(units, 4 * units, rng));
  RowMatrix b = RowMatrix::Zero(1, 4 * units);
  b.block(0, units, 1, units).setOnes();
  b_ = Param(name + ".bias", b);
}

RowMatrix LstmDirection::forward(const RowMatrix& x, int T, int B) {
  T_ = T;
  B_ = B;
  x_ = x;
  const int u = units_;
  gates_.resize(static_cast<Eigen::Index>(T) * B, 4 * u);
  gates_.noalias() = x * W_.value;
  gates_.rowwise() += b_.value.row(0);
  c_.resize(gates_.rows(), u);
  tanh_c_.resize(gates_.rows(), u);
  h_.resize(gates_.rows(), u);

  RowMatrix z(B, 4 * u);
  for (int s = 0; s < T; ++s) {
    const int t = reverse_ ? T - 1 - s : s;
    const Eigen::Index row = static_cast<Eigen::Index>(t) * B;
    z = gates_.middleRows(row, B);
    if (s > 0) {
      const int tp = reverse_ ? t + 1 : t - 1;
      z.noalias() += h_.middleRows(static_cast<Eigen::Index>(tp) * B, B) * U_.value;
    }
    for (Eigen::Index bi = 0; bi < B; ++bi) {
      for (int k = 0; k < u; ++k) {
        const double i = sigmoid(z(bi, k));
        const double f = sigmoid(z(bi, u + k));
        const double g = std::tanh(z(bi, 2 * u + k));
        const double o = sigmoid(z(bi, 3 * u + k));
        double c = i * g;
        if (s > 0) {
          const int tp = reverse_ ? t + 1 : t - 1;
          c += f * c_(static_cast<Eigen::Index>(tp) * B + bi, k);
        }
        const double tc = std::tanh(c);
        const Eigen::Index r = row + bi;
        gates_(r, k) = i;
        gates_(r, u + k) = f;
        gates_(r, 2 * u + k) = g;
        gates_(r, 3 * u + k) = o;
        c_(r, k) = c;
        tanh_c_(r, k) = tc;
        h_(r, k) = o * tc;
      }
    }
  }
  return h_;
}

RowMatrix LstmDirection::backward(const RowMatrix& dh_seq) {
  const int T = T_, B = B_, u = units_;
  RowMatrix dz_all(static_cast<Eigen::Index>(T) * B, 4 * u);
  RowMatrix dh_next = RowMatrix::Zero(B, u);
  RowMatrix dc_next = RowMatrix::Zero(B, u);
  RowMatrix dz(B, 4 * u);
  for (int s = T - 1; s >= 0; --s) {
    const int t = reverse_ ? T - 1 - s : s;
    const int tp = reverse_ ? t + 1 : t - 1;
    const Eigen::Index row = static_cast<Eigen::Index>(t) * B;
    const Eigen::Index prow = static_cast<Eigen::Index>(tp) * B;
    for (Eigen::Index bi = 0; bi < B; ++bi) {
      const Eigen::Index r = row + bi;
      for (int k = 0; k < u; ++k) {
        const double i = gates_(r, k), f = gates_(r, u + k), g = gates_(r, 2 * u + k), o = gates_(r, 3 * u + k);
        const double tc = tanh_c_(r, k);
        const double dh = dh_seq(r, k) + dh_next(bi, k);
        const double dc = dh * o * (1.0 - tc * tc) + dc_next(bi, k);
        const double c_prev = s > 0 ? c_(prow + bi, k) : 0.0;
        dz(bi, k) = dc * g * i * (1.0 - i);
        dz(bi, u + k) = dc * c_prev * f * (1.0 - f);
        dz(bi, 2 * u + k) = dc * i * (1.0 - g * g);
        dz(bi, 3 * u + k) = dh * tc * o * (1.0 - o);
        dc_next(bi, k) = dc * f;
      }
    }
    dz_all.middleRows(row, B) = dz;
    if (s > 0) {
      U_.grad.noalias() += h_.middleRows(prow, B).transpose() * dz;
      dh_next.noalias() = dz * U_.value.transpose();
    }
  }
  W_.grad.noalias() += x_.transpose() * dz_all;
  b_.grad += dz_all.colwise().sum();
  return dz_all * W_.value.transpose();
}

BiLstm::BiLstm(const std::string& name, int in, int units, Rng& rng)
    : fwd_(name + ".forward", in, units, false, rng), bwd_(name + ".backward", in, units, true, rng) {}

RowMatrix BiLstm::forward(const RowMatrix& x, int T, int B) {
  const int u = fwd_.units();
  RowMatrix out(x.rows(), 2 * u);
  out.leftCols(u) = fwd_.forward(x, T, B);
  out.rightCols(u) = bwd_.forward(x, T, B);
  return out;
}

RowMatrix BiLstm::backward(const RowMatrix& dy) {
  const int u = fwd_.units();
  RowMatrix dx = fwd_.backward(dy.leftCols(u));
  dx += bwd_.backward(dy.rightCols(u));
  return dx;
}

std::vector<Param*> BiLstm::params() {
  auto p = fwd_.params();
  for (auto* q : bwd_.params()) p.push_back(q);
  return p;
}

RowMatrix Dropout::forward(const RowMatrix& x, bool training, Rng* rng) {
  active_ = training && rate_ > 0.0;
  if (!active_) return x;
  const double keep = 1.0 - rate_;
  mask_.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask_.size(); ++i) mask_.data()[i] = uniform01(*rng) < keep ? 1.0 / keep : 0.0;
  return x.cwiseProduct(mask_);
}

RowMatrix Dropout::backward(const RowMatrix& dy) const { return active_ ? RowMatrix(dy.cwiseProduct(mask_)) : dy; }

BatchNorm::BatchNorm(const std::string& name, int features)
    : gamma_(name + ".gamma", RowMatrix::Ones(1, features)),
      beta_(name + ".beta", RowMatrix::Zero(1, features)),
      running_mean_(name + ".moving_mean", RowMatrix::Zero(1, features)),
      running_var_(name + ".moving_variance", RowMatrix::Ones(1, features)) {}

RowMatrix BatchNorm::forward(const RowMatrix& x, bool training) {
  if (!training) {
    const Eigen::RowVectorXd inv = (running_var_.value.row(0).array() + kEpsilon).rsqrt();
    RowMatrix y = (x.rowwise() - running_mean_.value.row(0)).array().rowwise() * (inv.array() * gamma_.value.row(0).array());
    y.rowwise() += beta_.value.row(0);
    return y;
  }
  const double n = static_cast<double>(x.rows());
  const Eigen::RowVectorXd mean = x.colwise().sum() / n;
  xhat_ = x.rowwise() - mean;
  const Eigen::RowVectorXd var = xhat_.array().square().colwise().sum() / n;
  inv_std_ = (var.array() + kEpsilon).rsqrt();
  xhat_.array().rowwise() *= inv_std_.array();
  running_mean_.value.row(0) = kMomentum * running_mean_.value.row(0) + (1.0 - kMomentum) * mean;
  running_var_.value.row(0) = kMomentum * running_var_.value.row(0) + (1.0 - kMomentum) * var;
  RowMatrix y = xhat_.array().rowwise() * gamma_.value.row(0).array();
  y.rowwise() += beta_.value.row(0);
  return y;
}

RowMatrix BatchNorm::backward(const RowMatrix& dy) {
  const double n = static_cast<double>(dy.rows());
  gamma_.grad.row(0) += dy.cwiseProduct(xhat_).colwise().sum();
  beta_.grad.row(0) += dy.colwise().sum();
  RowMatrix dxhat = dy.array().rowwise() * gamma_.value.row(0).array();
  const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
  const Eigen::RowVectorXd sum_dxhat_xhat = dxhat.cwiseProduct(xhat_).colwise().sum();
  RowMatrix dx = (dxhat * n).rowwise() - sum_dxhat;
  dx.array() -= xhat_.array().rowwise() * sum_dxhat_xhat.array();
  dx.array().rowwise() *= (inv_std_.array() / n);
  return dx;
}

Dense::Dense(const std::string& name, int in, int out, Rng& rng)
    : W_(name + ".kernel", glorot_uniform(in, out, rng)), b_(name + ".bias", RowMatrix::Zero(1, out)) {}

RowMatrix Dense::forward(const RowMatrix& x) {
  x_ = x;
  RowMatrix y = x * W_.value;
  y.rowwise() += b_.value.row(0);
  return y;
}

RowMatrix Dense::backward(const RowMatrix& dy) {
  W_.grad.noalias() += x_.transpose() * dy;
  b_.grad += dy.colwise().sum();
  return dy * W_.value.transpose();
}

RowMatrix repeat_over_time(const RowMatrix& x, int T) {
  const Eigen::Index B = x.rows();
  RowMatrix out(T * B, x.cols());
  for (int t = 0; t < T; ++t) out.middleRows(t * B, B) = x;
  return out;
}

RowMatrix sum_over_time(const RowMatrix& dy, int T, int B) {
  RowMatrix out = RowMatrix::Zero(B, dy.cols());
  for (int t = 0; t < T; ++t) out += dy.middleRows(static_cast<Eigen::Index>(t) * B, B);
  return out;
}

RowMatrix flatten_time(const RowMatrix& x, int T, int B) {
  const Eigen::Index D = x.cols();
  RowMatrix out(B, T * D);
  for (int t = 0; t < T; ++t) {
    out.middleCols(t * D, D) = x.middleRows(static_cast<Eigen::Index>(t) * B, B);
  }
  return out;
}

RowMatrix unflatten_time(const RowMatrix& x, int T, int B) {
  const Eigen::Index D = x.cols() / T;
  RowMatrix out(static_cast<Eigen::Index>(T) * B, D);
  for (int t = 0; t < T; ++t) {
    out.middleRows(static_cast<Eigen::Index>(t) * B, B) = x.middleCols(t * D, D);
  }
  return out;
}

}  // namespace depscreen
