// SPDX-License-Identifier: Apache-2.0
#include "fusion/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "common/crypto.hpp"
#include "common/error.hpp"

namespace depscreen {
namespace {

constexpr double kLeakySlope = 0.01;
constexpr char kCheckpointMagic[8] = {'D', 'S', 'F', 'U', 'S', 'E', '0', '1'};

FauScaler identity_scaler() {
  FauScaler s;
  s.means.fill(0.0);
  s.stds.fill(1.0);
  s.degenerate.fill(false);
  return s;
}

}  // namespace

FusionModel::FusionModel(const FusionHyperparams& h, int t_frames, std::uint64_t seed, int n_mfcc)
    : h_((h.validate(), h)),
      t_frames_(t_frames),
      n_mfcc_(n_mfcc),
      seed_(seed),
      scaler_(identity_scaler()),
      init_rng_(derive_seed(seed, {0x1417})),
      lstm1_("bilstm1", n_mfcc, h.bilstm1_units, init_rng_),
      lstm2_("bilstm2", 2 * h.bilstm1_units, h.bilstm2_units, init_rng_),
      lstm3_("bilstm3", 2 * h.bilstm2_units, h.bilstm3_units, init_rng_),
      drop1_(h.dropout1),
      drop2_(h.dropout2),
      drop3_(h.dropout3),
      bn1_("bn1", 2 * h.bilstm1_units),
      bn2_("bn2", 2 * h.bilstm2_units),
      bn3_("bn3", 2 * h.bilstm3_units),
      fau_proj_("fau_projection", kFauFlatWidth, 2 * h.bilstm3_units, init_rng_),
      fusion_lstm_("fusion_bilstm", 4 * h.bilstm3_units, h.fusion_bilstm_units, init_rng_),
      fusion_drop_(h.fusion_dropout),
      fusion_bn_("fusion_bn", 2 * h.fusion_bilstm_units),
      llm_proj_("llm_projection", 1, 2 * h.fusion_bilstm_units, init_rng_) {
  if (t_frames <= 0 || n_mfcc <= 0) fail(ErrorCode::kShapeMismatch, "t_frames and n_mfcc must be positive");
  int in = t_frames * 4 * h.fusion_bilstm_units;
  int i = 0;
  for (int w : h.dense_widths()) {
    head_.emplace_back("dense" + std::to_string(++i), in, w, init_rng_);
    in = w;
  }
  head_.emplace_back("output", in, 1, init_rng_);
}

RowMatrix FusionModel::pack_mfcc(const SegmentBatch& batch) const {
  const int B = static_cast<int>(batch.size());
  RowMatrix x(static_cast<Eigen::Index>(t_frames_) * B, n_mfcc_);
  for (int b = 0; b < B; ++b) {
    const RowMatrix& m = *batch.mfcc[b];
    if (m.rows() != t_frames_ || m.cols() != n_mfcc_) {
      fail(ErrorCode::kShapeMismatch, "MFCC block is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                          ", model expects " + std::to_string(t_frames_) + "x" +
                                          std::to_string(n_mfcc_));
    }
    for (int t = 0; t < t_frames_; ++t) x.row(static_cast<Eigen::Index>(t) * B + b) = m.row(t);
  }
  return x;
}

RowMatrix FusionModel::pack_fau(const SegmentBatch& batch) const {
  const int B = static_cast<int>(batch.size());
  RowMatrix x(B, kFauFlatWidth);
  for (int b = 0; b < B; ++b) {
    const RowMatrix& m = *batch.fau[b];
    if (m.rows() != static_cast<Eigen::Index>(kFauSegmentRows) || m.cols() != kFauColumns) {
      fail(ErrorCode::kShapeMismatch, "FAU block must be 240x20");
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < kFauColumns; ++c) {
        double v = m(r, static_cast<Eigen::Index>(c));
        if (c < kFauIntensityCount) v = (v - scaler_.means[c]) / scaler_.stds[c];
        x(b, r * static_cast<Eigen::Index>(kFauColumns) + static_cast<Eigen::Index>(c)) = v;
      }
    }
  }
  return x;
}

Eigen::VectorXd FusionModel::forward(const SegmentBatch& batch, bool training, Rng* rng) {
  const int B = static_cast<int>(batch.size());
  if (B == 0) fail(ErrorCode::kEmptyInput, "empty batch");
  if (batch.fau.size() != batch.size() || batch.llm.size() != batch.size()) {
    fail(ErrorCode::kShapeMismatch, "batch fields have different lengths");
  }
  if (training && rng == nullptr &&
      (h_.dropout1 > 0 || h_.dropout2 > 0 || h_.dropout3 > 0 || h_.fusion_dropout > 0)) {
    fail(ErrorCode::kValidation, "training forward pass with dropout needs an RNG");
  }
  B_ = B;
  const int T = t_frames_;

  // (1) MFCC branch.
  RowMatrix a = pack_mfcc(batch);
  a = bn1_.forward(drop1_.forward(lstm1_.forward(a, T, B), training, rng), training);
  a = bn2_.forward(drop2_.forward(lstm2_.forward(a, T, B), training, rng), training);
  a = bn3_.forward(drop3_.forward(lstm3_.forward(a, T, B), training, rng), training);
  const Eigen::Index w3 = a.cols();

  // (2) FAU branch: flatten, project, repeat per timestep.
  const RowMatrix fau = repeat_over_time(fau_proj_.forward(pack_fau(batch)), T);

  // (3) Feature-axis concatenation.
  RowMatrix c1(a.rows(), w3 + fau.cols());
  c1 << a, fau;

  // (4) Fusion recurrence.
  RowMatrix f = fusion_bn_.forward(fusion_drop_.forward(fusion_lstm_.forward(c1, T, B), training, rng), training);

  // (5) Text branch.
  RowMatrix llm_in(B, 1);
  for (int b = 0; b < B; ++b) llm_in(b, 0) = batch.llm[b];
  const RowMatrix l = repeat_over_time(llm_proj_.forward(llm_in), T);

  // (6) Concatenation.
  RowMatrix c2(f.rows(), f.cols() + l.cols());
  c2 << f, l;

  // (7) Dense head.
  RowMatrix x = flatten_time(c2, T, B);
  shapes_ = ShapeReport{{T, w3}, {T, fau.cols()}, {T, c1.cols()}, {T, f.cols()},
                        {T, l.cols()}, {T, c2.cols()}, {1, x.cols()}};
  head_pre_.clear();
  for (std::size_t i = 0; i + 1 < head_.size(); ++i) {
    RowMatrix z = head_[i].forward(x);
    x = z.unaryExpr([](double v) { return v > 0 ? v : kLeakySlope * v; });
    head_pre_.push_back(std::move(z));
  }
  const RowMatrix logits = head_.back().forward(x);
  return logits.col(0);
}

void FusionModel::backward(const Eigen::VectorXd& dlogits) {
  const int T = t_frames_, B = B_;
  RowMatrix d = head_.back().backward(RowMatrix(dlogits));
  for (std::size_t i = head_.size() - 1; i-- > 0;) {
    const RowMatrix& z = head_pre_[i];
    d = d.array() * z.unaryExpr([](double v) { return v > 0 ? 1.0 : kLeakySlope; }).array();
    d = head_[i].backward(d);
  }
  const RowMatrix dc2 = unflatten_time(d, T, B);
  const Eigen::Index wf = 2 * h_.fusion_bilstm_units;
  llm_proj_.backward(sum_over_time(dc2.rightCols(dc2.cols() - wf), T, B));
  RowMatrix dc1 = fusion_lstm_.backward(fusion_drop_.backward(fusion_bn_.backward(dc2.leftCols(wf))));
  const Eigen::Index w3 = 2 * h_.bilstm3_units;
  fau_proj_.backward(sum_over_time(dc1.rightCols(dc1.cols() - w3), T, B));
  RowMatrix da = dc1.leftCols(w3);
  da = lstm3_.backward(drop3_.backward(bn3_.backward(da)));
  da = lstm2_.backward(drop2_.backward(bn2_.backward(da)));
  lstm1_.backward(drop1_.backward(bn1_.backward(da)));
}

Eigen::VectorXd FusionModel::predict(const SegmentBatch& batch) {
  std::lock_guard lock(predict_mutex_);
  const Eigen::VectorXd z = forward(batch, false);
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

std::vector<Param*> FusionModel::parameters() {
  std::vector<Param*> p;
  auto add = [&p](std::vector<Param*> q) { p.insert(p.end(), q.begin(), q.end()); };
  add(lstm1_.params());
  add(bn1_.params());
  add(lstm2_.params());
  add(bn2_.params());
  add(lstm3_.params());
  add(bn3_.params());
  add(fau_proj_.params());
  add(fusion_lstm_.params());
  add(fusion_bn_.params());
  add(llm_proj_.params());
  for (auto& d : head_) add(d.params());
  return p;
}

std::vector<Param*> FusionModel::state() {
  std::vector<Param*> s;
  for (BatchNorm* bn : {&bn1_, &bn2_, &bn3_, &fusion_bn_}) {
    for (Param* p : bn->state()) s.push_back(p);
  }
  return s;
}

std::vector<Param*> FusionModel::all_tensors() {
  auto p = parameters();
  for (Param* s : state()) p.push_back(s);
  return p;
}

void FusionModel::zero_grad() {
  for (Param* p : parameters()) p->zero_grad();
}

std::size_t FusionModel::parameter_count() {
  std::size_t n = 0;
  for (Param* p : parameters()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

std::vector<RowMatrix> FusionModel::snapshot() {
  std::vector<RowMatrix> out;
  for (Param* p : all_tensors()) out.push_back(p->value);
  return out;
}

void FusionModel::restore(const std::vector<RowMatrix>& tensors) {
  auto all = all_tensors();
  if (tensors.size() != all.size()) fail(ErrorCode::kShapeMismatch, "snapshot tensor count differs");
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (tensors[i].rows() != all[i]->value.rows() || tensors[i].cols() != all[i]->value.cols()) {
      fail(ErrorCode::kShapeMismatch, "snapshot tensor " + all[i]->name + " has the wrong shape");
    }
    all[i]->value = tensors[i];
  }
}

std::string FusionModel::checksum() {
  std::string bytes;
  for (Param* p : all_tensors()) {
    bytes.append(p->name);
    bytes.append(reinterpret_cast<const char*>(p->value.data()), sizeof(double) * p->value.size());
  }
  return sha256_hex(bytes);
}

ShapeReport FusionModel::expected_shapes() const {
  const long T = t_frames_;
  const long w3 = 2L * h_.bilstm3_units, wf = 2L * h_.fusion_bilstm_units;
  return ShapeReport{{T, w3}, {T, w3}, {T, 2 * w3}, {T, wf}, {T, wf}, {T, 2 * wf}, {1, T * 2 * wf}};
}

void FusionModel::save(const std::filesystem::path& path) {
  nlohmann::json arch;
  arch["format"] = "depscreen-fusion";
  arch["version"] = 1;
  arch["hyperparams"] = h_.to_json();
  arch["t_frames"] = t_frames_;
  arch["n_mfcc"] = n_mfcc_;
  arch["seed"] = seed_;
  arch["fau_scaler"] = nlohmann::json::parse(scaler_.to_json());
  nlohmann::json tensors = nlohmann::json::array();
  auto all = all_tensors();
  for (Param* p : all) tensors.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  arch["tensors"] = tensors;
  const std::string header = arch.dump();

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write checkpoint " + path.string());
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    const std::uint64_t len = header.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (Param* p : all) {
      out.write(reinterpret_cast<const char*>(p->value.data()),
                static_cast<std::streamsize>(sizeof(double) * p->value.size()));
    }
    if (!out) fail(ErrorCode::kIo, "short write on checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

std::unique_ptr<FusionModel> FusionModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kMissingFile, "checkpoint not found: " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    fail(ErrorCode::kMalformedPayload, "not a fusion checkpoint: " + path.string());
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1u << 26)) fail(ErrorCode::kMalformedPayload, "corrupt checkpoint header");
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  nlohmann::json arch;
  try {
    arch = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformedPayload, std::string("corrupt checkpoint header: ") + e.what());
  }
  auto model = std::make_unique<FusionModel>(FusionHyperparams::from_json(arch.at("hyperparams")),
                                             arch.at("t_frames").get<int>(), arch.at("seed").get<std::uint64_t>(),
                                             arch.at("n_mfcc").get<int>());
  model->scaler_ = FauScaler::from_json(arch.at("fau_scaler").dump());
  auto all = model->all_tensors();
  const auto& listed = arch.at("tensors");
  if (listed.size() != all.size()) fail(ErrorCode::kShapeMismatch, "checkpoint tensor count differs from architecture");
  for (std::size_t i = 0; i < all.size(); ++i) {
    Param* p = all[i];
    if (listed[i].at("name") != p->name || listed[i].at("rows") != p->value.rows() ||
        listed[i].at("cols") != p->value.cols()) {
      fail(ErrorCode::kShapeMismatch, "checkpoint tensor " + p->name + " does not match architecture");
    }
    in.read(reinterpret_cast<char*>(p->value.data()), static_cast<std::streamsize>(sizeof(double) * p->value.size()));
  }
  if (!in) fail(ErrorCode::kMalformedPayload, "checkpoint truncated: " + path.string());
  return model;
}

}  // namespace depscreen
