// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fusion/model.hpp"
#include "fusion/train.hpp"
#include "support.hpp"

using namespace depscreen;
using depscreen::testing::code_of;
using depscreen::testing::TempDir;

namespace {

FusionHyperparams tiny_hyperparams() {
  FusionHyperparams h;
  h.bilstm1_units = 4;
  h.bilstm2_units = 4;
  h.bilstm3_units = 4;
  h.fusion_bilstm_units = 4;
  h.dropout1 = h.dropout2 = h.dropout3 = h.fusion_dropout = 0.0;
  h.n_dense = 4;
  h.dense_top = 8;
  h.batch_size = 8;
  return h;
}

// Random segments; label-1 segments get a mean shift on MFCC and FAU so a
// small model can separate them.
SegmentSet random_set(int n, int T, int n_mfcc, std::uint64_t seed, int first_id = 0, double shift = 0.8) {
  Rng rng(seed);
  SegmentSet set;
  for (int i = 0; i < n; ++i) {
    SegmentExample e;
    e.interview_id = first_id + i;
    e.segment_index = 0;
    e.tag = "orig";
    e.label = i % 2;
    e.llm = static_cast<double>(e.label);
    RowMatrix m(T, n_mfcc);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = gaussian(rng) + shift * e.label;
    RowMatrix f(kFauSegmentRows, kFauColumns);
    for (Eigen::Index k = 0; k < f.size(); ++k) f.data()[k] = 2.0 + gaussian(rng) - shift * e.label;
    e.mfcc = std::make_shared<const RowMatrix>(std::move(m));
    e.fau = std::make_shared<const RowMatrix>(std::move(f));
    set.push_back(std::move(e));
  }
  return set;
}

TrainOptions options(int max_epochs, std::uint64_t seed) {
  TrainOptions o;
  o.max_epochs = max_epochs;
  o.seed = seed;
  return o;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

TEST_CASE("analytic gradients match central differences on the tiny network") {
  const int T = 12;
  FusionModel model(tiny_hyperparams(), T, 7, 6);
  SegmentSet set = random_set(4, T, 6, 99);
  FauScaler s;
  s.means.fill(2.0);
  s.stds.fill(1.5);
  model.set_fau_scaler(s);
  const SegmentBatch batch = make_batch(set, all_indices(set.size()));
  const ClassWeights w{0.7, 1.7};

  model.zero_grad();
  const Eigen::VectorXd z = model.forward(batch, true);
  model.backward(weighted_bce_gradient(z, batch.labels, w));
  auto params = model.parameters();
  std::vector<RowMatrix> analytic;
  for (Param* p : params) analytic.push_back(p->grad);

  auto loss_at = [&]() { return weighted_bce(model.forward(batch, true), batch.labels, w); };
  Rng rng(2024);
  const double eps = 1e-5;
  double worst = 0.0;
  std::set<std::string> touched;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t pi = uniform_index(rng, params.size());
    Param* p = params[pi];
    const Eigen::Index k = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(p->value.size())));
    const double orig = p->value.data()[k];
    p->value.data()[k] = orig + eps;
    const double up = loss_at();
    p->value.data()[k] = orig - eps;
    const double down = loss_at();
    p->value.data()[k] = orig;
    const double numeric = (up - down) / (2 * eps);
    const double a = analytic[pi].data()[k];
    const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-8);
    worst = std::max(worst, rel);
    touched.insert(p->name);
    CHECK_MESSAGE(rel <= 1e-4, p->name << "[" << k << "] analytic " << a << " numeric " << numeric);
  }
  MESSAGE("worst relative error " << worst << " over " << touched.size() << " tensors");
}

TEST_CASE("default hyperparameters propagate the derived widths at 247 frames") {
  const FusionHyperparams h;
  CHECK(h.bilstm1_units == 256);
  CHECK(h.dropout1 == 0.5);
  CHECK(h.bilstm2_units == 128);
  CHECK(h.dropout2 == 0.3);
  CHECK(h.bilstm3_units == 64);
  CHECK(h.dropout3 == 0.5);
  CHECK(h.n_dense == 4);
  CHECK(h.dense_widths() == std::vector<int>{256, 128, 64, 32});

  FusionModel model(h, 247, 1);
  SegmentBatch b;
  b.mfcc.push_back(std::make_shared<const RowMatrix>(RowMatrix::Zero(247, 60)));
  b.fau.push_back(std::make_shared<const RowMatrix>(RowMatrix::Zero(240, 20)));
  b.llm.push_back(0.0);
  b.labels.push_back(0.0);
  b.interview_ids.push_back(1);
  const Eigen::VectorXd p = model.predict(b);
  CHECK(p(0) > 0.0);
  CHECK(p(0) < 1.0);

  const ShapeReport& s = model.last_shapes();
  CHECK(s.mfcc_branch == TensorShape{247, 128});
  CHECK(s.fau_projection == TensorShape{247, 128});
  CHECK(s.first_concat == TensorShape{247, 256});
  CHECK(s.fusion == TensorShape{247, 128});
  CHECK(s.llm_projection == TensorShape{247, 128});
  CHECK(s.second_concat == TensorShape{247, 256});
  CHECK(s.head_input == TensorShape{1, 247 * 256});
  const ShapeReport e = model.expected_shapes();
  CHECK(e.mfcc_branch == s.mfcc_branch);
  CHECK(e.head_input == s.head_input);
}

TEST_CASE("deeper heads extend the halving ladder") {
  FusionHyperparams h;
  h.n_dense = 6;
  CHECK(h.dense_widths() == std::vector<int>{256, 128, 64, 32, 16, 8});
  h.n_dense = 5;
  CHECK(h.dense_widths() == std::vector<int>{256, 128, 64, 32, 16});
}

TEST_CASE("hyperparameter JSON round trip and validation") {
  FusionHyperparams h = tiny_hyperparams();
  h.learning_rate = 3e-3;
  CHECK(FusionHyperparams::from_json(h.to_json()) == h);
  CHECK(FusionHyperparams::from_json(h.to_json()).hash() == h.hash());
  auto j = h.to_json();
  j["dropout1"] = 1.0;
  CHECK(code_of([&] { FusionHyperparams::from_json(j); }) == ErrorCode::kValidation);
  j = h.to_json();
  j["bilstm1_units"] = 0;
  CHECK(code_of([&] { FusionHyperparams::from_json(j); }) == ErrorCode::kValidation);
}

TEST_CASE("seeded construction is reproducible") {
  FusionModel a(tiny_hyperparams(), 12, 5, 6);
  FusionModel b(tiny_hyperparams(), 12, 5, 6);
  FusionModel c(tiny_hyperparams(), 12, 6, 6);
  CHECK(a.checksum() == b.checksum());
  CHECK(a.checksum() != c.checksum());
}

TEST_CASE("initializers follow the recurrent conventions") {
  Rng rng(3);
  const RowMatrix q = orthogonal(8, 32, rng);
  CHECK((q * q.transpose() - RowMatrix::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-12);
  const RowMatrix g = glorot_uniform(10, 30, rng);
  CHECK(g.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 40.0));
}

TEST_CASE("class weights") {
  std::vector<int> labels(56, 1);
  labels.insert(labels.end(), 133, 0);
  const ClassWeights w = class_weights(labels);
  CHECK(w.positive == doctest::Approx(189.0 / 112.0).epsilon(1e-12));
  CHECK(w.negative == doctest::Approx(189.0 / 266.0).epsilon(1e-12));
  CHECK(w.positive == doctest::Approx(1.6875));
  CHECK(w.positive > w.negative);

  const ClassWeights bal = class_weights({0, 1, 1, 0});
  CHECK(bal.positive == 1.0);
  CHECK(bal.negative == 1.0);
  CHECK(code_of([] { class_weights({1, 1, 1}); }) == ErrorCode::kSingleClass);
  CHECK(code_of([] { class_weights({}); }) == ErrorCode::kSingleClass);
}

TEST_CASE("unit-weighted loss equals plain binary cross-entropy") {
  Rng rng(11);
  Eigen::VectorXd z(9);
  std::vector<double> y;
  double plain = 0.0;
  for (int i = 0; i < 9; ++i) {
    z(i) = gaussian(rng, 0.0, 3.0);
    y.push_back(i % 3 == 0 ? 1.0 : 0.0);
    const double p = 1.0 / (1.0 + std::exp(-z(i)));
    plain -= y.back() * std::log(p) + (1 - y.back()) * std::log(1 - p);
  }
  plain /= 9.0;
  CHECK(weighted_bce(z, y, ClassWeights{}) == doctest::Approx(plain).epsilon(1e-12));
  // Scaling both weights scales the loss.
  CHECK(weighted_bce(z, y, ClassWeights{2.0, 2.0}) == doctest::Approx(2 * plain).epsilon(1e-12));
}

TEST_CASE("early stopping follows the patience-3 rule") {
  EarlyStopping es(3);
  const std::vector<double> seq{1.0, 0.9, 0.91, 0.92, 0.93, 0.5};
  int stopped_at = 0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (es.update(seq[i])) {
      stopped_at = static_cast<int>(i) + 1;
      break;
    }
  }
  CHECK(stopped_at == 5);
  CHECK(es.best_epoch() == 2);
  CHECK(es.best_loss() == 0.9);

  EarlyStopping keeps_going(3);
  for (double l : {1.0, 0.9, 0.95, 0.96, 0.8, 0.85, 0.86}) CHECK_FALSE(keeps_going.update(l));
  CHECK(keeps_going.update(0.87));
}

TEST_CASE("inference is deterministic, batch invariant and permutation equivariant") {
  const int T = 16;
  FusionHyperparams h = tiny_hyperparams();
  h.dropout1 = 0.5;
  h.fusion_dropout = 0.3;
  FusionModel model(h, T, 21, 6);
  SegmentSet set = random_set(8, T, 6, 5);
  // A few training steps so batch-norm running statistics are not trivial.
  train(model, set, nullptr, ClassWeights{}, options(2, 1));

  const SegmentBatch full = make_batch(set, all_indices(8));
  const Eigen::VectorXd p1 = model.predict(full);
  const Eigen::VectorXd p2 = model.predict(full);
  CHECK((p1 - p2).cwiseAbs().maxCoeff() == 0.0);
  for (Eigen::Index i = 0; i < p1.size(); ++i) {
    CHECK(std::isfinite(p1(i)));
    CHECK(p1(i) > 0.0);
    CHECK(p1(i) < 1.0);
  }
  for (std::size_t i = 0; i < 8; ++i) {
    const Eigen::VectorXd single = model.predict(make_batch(set, {i}));
    CHECK(std::abs(single(0) - p1(static_cast<Eigen::Index>(i))) <= 1e-5);
  }
  const std::vector<std::size_t> perm{3, 7, 0, 5, 1, 6, 2, 4};
  const Eigen::VectorXd pp = model.predict(make_batch(set, perm));
  for (std::size_t i = 0; i < perm.size(); ++i) {
    CHECK(pp(static_cast<Eigen::Index>(i)) == doctest::Approx(p1(static_cast<Eigen::Index>(perm[i]))).epsilon(1e-12));
  }
}

TEST_CASE("one optimizer step lowers the batch loss") {
  const int T = 12;
  FusionModel model(tiny_hyperparams(), T, 3, 6);
  SegmentSet set = random_set(8, T, 6, 17);
  const SegmentBatch b = make_batch(set, all_indices(8));
  const ClassWeights w{};
  model.zero_grad();
  const double before = weighted_bce(model.forward(b, true), b.labels, w);
  model.backward(weighted_bce_gradient(model.forward(b, true), b.labels, w));
  Adam adam(1e-3);
  adam.step(model.parameters());
  const double after = weighted_bce(model.forward(b, true), b.labels, w);
  CHECK(after < before);
}

TEST_CASE("training separates a shifted toy set and restores the best epoch") {
  const int T = 12;
  FusionHyperparams h = tiny_hyperparams();
  h.learning_rate = 5e-3;
  FusionModel model(h, T, 8, 6);
  SegmentSet tr = random_set(24, T, 6, 31, 0);
  SegmentSet va = random_set(8, T, 6, 32, 100);
  std::vector<int> labels;
  for (const auto& e : tr) labels.push_back(e.label);
  int callbacks = 0;
  TrainOptions opt;
  opt.max_epochs = 30;
  opt.seed = 4;
  opt.on_epoch = [&](const EpochRecord&) { ++callbacks; };
  const TrainResult r = train(model, tr, &va, class_weights(labels), opt);
  CHECK(callbacks == static_cast<int>(r.history.epochs.size()));
  REQUIRE(r.history.best_epoch >= 1);
  const double best_val = r.history.epochs[static_cast<std::size_t>(r.history.best_epoch - 1)].val_loss;
  for (const auto& e : r.history.epochs) CHECK(e.val_loss >= best_val);
  CHECK(evaluate(model, va).loss == doctest::Approx(best_val).epsilon(1e-9));
  CHECK(r.history.epochs.back().train_accuracy >= 0.9);
  CHECK(r.audit.training_ids.size() == 24);
  CHECK(r.audit.scaler_ids == r.audit.training_ids);
  CHECK(r.audit.validation_ids.size() == 8);
  const std::string csv = r.history.to_csv();
  CHECK(csv.rfind("epoch,train_loss,train_accuracy,val_loss,val_accuracy\n", 0) == 0);
}

TEST_CASE("training rejects leakage, augmented validation data and non-finite loss") {
  const int T = 12;
  FusionModel model(tiny_hyperparams(), T, 8, 6);
  SegmentSet tr = random_set(6, T, 6, 1, 0);
  SegmentSet va = random_set(2, T, 6, 2, 5);  // ids 5 and 6; 5 overlaps
  CHECK(code_of([&] { train(model, tr, &va, ClassWeights{}, TrainOptions{}); }) == ErrorCode::kLeakageDetected);

  SegmentSet va2 = random_set(2, T, 6, 2, 50);
  va2[0].tag = "noise";
  CHECK(code_of([&] { train(model, tr, &va2, ClassWeights{}, TrainOptions{}); }) == ErrorCode::kValidation);

  SegmentSet bad_llm = tr;
  bad_llm.push_back(tr[0]);
  bad_llm.back().llm = 1.0 - tr[0].llm;
  CHECK(code_of([&] { train(model, bad_llm, nullptr, ClassWeights{}, TrainOptions{}); }) == ErrorCode::kValidation);

  SegmentSet nan_set = tr;
  RowMatrix m = *nan_set[0].mfcc;
  m(0, 0) = std::nan("");
  nan_set[0].mfcc = std::make_shared<const RowMatrix>(m);
  CHECK(code_of([&] { train(model, nan_set, nullptr, ClassWeights{}, options(1, 0)); }) ==
        ErrorCode::kNonFiniteLoss);

  CHECK(code_of([&] { train(model, SegmentSet{}, nullptr, ClassWeights{}, TrainOptions{}); }) ==
        ErrorCode::kEmptyTrainingSet);
}

TEST_CASE("mismatched input shapes are rejected") {
  FusionModel model(tiny_hyperparams(), 12, 8, 6);
  SegmentSet wrong_t = random_set(2, 13, 6, 1);
  CHECK(code_of([&] { model.predict(make_batch(wrong_t, {0, 1})); }) == ErrorCode::kShapeMismatch);
  SegmentSet wrong_f = random_set(2, 12, 5, 1);
  CHECK(code_of([&] { model.predict(make_batch(wrong_f, {0, 1})); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("interview aggregation") {
  const InterviewDecision d = aggregate_interview({0.9, 0.8, 0.95});
  CHECK(d.diagnosis == Label::kDepressed);
  CHECK(d.confidence == doctest::Approx(0.883333333333).epsilon(1e-9));
  CHECK(aggregate_interview({0.5}).diagnosis == Label::kDepressed);
  CHECK(aggregate_interview({0.49}).diagnosis == Label::kNotDepressed);
  // Mean and vote can disagree.
  const InterviewDecision split = aggregate_interview({0.1, 0.1, 0.6});
  CHECK(split.diagnosis == Label::kNotDepressed);
  CHECK(split.majority == Label::kNotDepressed);
  const InterviewDecision skew = aggregate_interview({0.01, 0.55, 0.55});
  CHECK(skew.diagnosis == Label::kNotDepressed);
  CHECK(skew.majority == Label::kDepressed);
  CHECK(code_of([] { aggregate_interview({}); }) == ErrorCode::kEmptyInput);
}

TEST_CASE("checkpoint round trip preserves predictions, statistics and scaler") {
  TempDir dir;
  const int T = 12;
  FusionModel model(tiny_hyperparams(), T, 8, 6);
  SegmentSet set = random_set(8, T, 6, 3);
  train(model, set, nullptr, ClassWeights{}, options(2, 2));
  const auto path = dir / "model.ckpt";
  model.save(path);
  auto loaded = FusionModel::load(path);
  CHECK(loaded->hyperparams() == model.hyperparams());
  CHECK(loaded->fau_scaler() == model.fau_scaler());
  CHECK(loaded->checksum() == model.checksum());
  const SegmentBatch b = make_batch(set, all_indices(8));
  CHECK((loaded->predict(b) - model.predict(b)).cwiseAbs().maxCoeff() == 0.0);

  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 16);
  CHECK(code_of([&] { FusionModel::load(path); }) == ErrorCode::kMalformedPayload);
  CHECK(code_of([&] { FusionModel::load(dir / "absent.ckpt"); }) == ErrorCode::kMissingFile);
}
