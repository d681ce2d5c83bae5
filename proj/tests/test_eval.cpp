// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "common/fs.hpp"
#include "eval/metrics.hpp"
#include "eval/protocols.hpp"
#include "fixtures.hpp"
#include "support.hpp"

using namespace depscreen;
using depscreen::testing::code_of;
using depscreen::testing::TempDir;

namespace {

const EvalCorpus& augmented_corpus() {
  static const EvalCorpus c = depscreen::testing::small_eval_corpus(6, true);
  return c;
}

EvalOptions quick_options() {
  EvalOptions o;
  o.hyperparams = depscreen::testing::tiny_net();
  o.max_epochs = 2;
  o.seed = 3;
  return o;
}

}  // namespace

TEST_CASE("metrics on the leave-one-subject-out matrix match the published figures") {
  const MetricSet s = compute_metrics(ConfusionMatrix{52, 13, 4, 120});
  CHECK(s.accuracy.value() == doctest::Approx(0.9101).epsilon(0.00006 / 0.9101));
  CHECK(std::abs(100 * s.accuracy.value() - 91.01) <= 0.01);
  CHECK(std::abs(100 * s.f1_d.value() - 85.95) <= 0.01);
  CHECK(std::abs(100 * s.precision_d.value() - 80.00) <= 0.01);
  CHECK(std::abs(100 * s.recall_d.value() - 92.86) <= 0.01);
  CHECK(std::abs(100 * s.precision_nd.value() - 96.77) <= 0.01);
  CHECK(std::abs(100 * s.recall_nd.value() - 90.23) <= 0.01);
  // Exact rationals.
  CHECK(s.f1_d.num == 104);
  CHECK(s.f1_d.den == 121);
  CHECK(s.accuracy.num == 172);
  CHECK(s.accuracy.den == 189);
  CHECK(s.accuracy.percent() == "91.01");
  CHECK(consistency_warnings(ConfusionMatrix{52, 13, 4, 120}, published_losocv_figures()).empty());
}

TEST_CASE("a perfect classifier scores 1 everywhere") {
  const MetricSet s = compute_metrics(ConfusionMatrix{1, 0, 0, 1});
  for (const Ratio* r : {&s.precision_d, &s.precision_nd, &s.recall_d, &s.recall_nd, &s.f1_d, &s.f1_nd, &s.accuracy}) {
    CHECK(r->value() == 1.0);
  }
}

TEST_CASE("the published split matrix contradicts the published split row") {
  const ConfusionMatrix m = published_avec_matrix();
  const MetricSet s = compute_metrics(m);
  CHECK(s.accuracy.percent() == "91.49");
  CHECK(s.recall_d.percent() == "84.21");
  const auto warnings = consistency_warnings(m, published_avec_figures());
  bool acc = false, rec = false;
  for (const auto& w : warnings) {
    if (w.rfind("accuracy", 0) == 0 && w.find("91.49") != std::string::npos && w.find("85.11") != std::string::npos) acc = true;
    if (w.rfind("recall_d", 0) == 0 && w.find("84.21") != std::string::npos && w.find("68.42") != std::string::npos) rec = true;
  }
  CHECK(acc);
  CHECK(rec);
  // The only 47-interview matrix reproducing the published row.
  const auto matches = matrices_matching(published_avec_figures(), 47);
  REQUIRE(matches.size() == 1);
  CHECK(matches[0] == ConfusionMatrix{13, 1, 6, 27});
}

TEST_CASE("undefined metrics are reported as undefined, not zero") {
  const MetricSet s = compute_metrics(ConfusionMatrix{0, 0, 3, 5});
  CHECK_FALSE(s.precision_d.defined());
  CHECK(s.precision_d.percent() == "undefined");
  CHECK(s.precision_d.to_json().is_null());
  CHECK(code_of([&] { (void)s.precision_d.value(); }) == ErrorCode::kDegenerateDenominator);
  CHECK_FALSE(s.f1_d.defined());
  CHECK(s.recall_d.value() == 0.0);
  CHECK(code_of([] { (void)compute_metrics(ConfusionMatrix{}).accuracy.value(); }) == ErrorCode::kDegenerateDenominator);
}

TEST_CASE("metrics are recomputable from the matrix for random matrices") {
  Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const ConfusionMatrix m{static_cast<long>(uniform_index(rng, 30)) + 1, static_cast<long>(uniform_index(rng, 30)),
                            static_cast<long>(uniform_index(rng, 30)), static_cast<long>(uniform_index(rng, 30)) + 1};
    const MetricSet s = compute_metrics(m);
    CHECK(s.accuracy.value() * m.total() == doctest::Approx(m.tp + m.tn));
    const double p = s.precision_d.value(), r = s.recall_d.value();
    CHECK(s.f1_d.value() == doctest::Approx(2 * p * r / (p + r)));
    CHECK(s.recall_nd.value() == doctest::Approx(static_cast<double>(m.tn) / (m.tn + m.fp)));
  }
}

TEST_CASE("split definitions") {
  SplitDefinition s{{1, 2, 3}, {4}, {5, 6}};
  CHECK_NOTHROW(s.validate());
  CHECK(code_of([&] { s.validate({5}); }) == ErrorCode::kLeakageDetected);
  SplitDefinition overlap{{1, 2}, {2}, {3}};
  CHECK(code_of([&] { overlap.validate(); }) == ErrorCode::kLeakageDetected);
  SplitDefinition empty{{1, 2}, {3}, {}};
  CHECK(code_of([&] { empty.validate(); }) == ErrorCode::kValidation);

  TempDir dir;
  write_split_csv(dir / "train_split.csv", {1, 2, 3}, {{1, {0, 3}}, {2, {1, 14}}});
  write_split_csv(dir / "dev_split.csv", {4}, {});
  write_split_csv(dir / "test_split.csv", {5, 6}, {});
  const SplitDefinition loaded = load_split(dir.path());
  CHECK(loaded.train_ids == std::vector<int>{1, 2, 3});
  CHECK(loaded.validation_ids == std::vector<int>{4});
  CHECK(loaded.test_ids == std::vector<int>{5, 6});
  std::filesystem::remove(dir / "dev_split.csv");
  CHECK(code_of([&] { load_split(dir.path()); }) == ErrorCode::kMissingFile);
  write_file_atomic(dir / "dev_split.csv", "Participant_ID\nabc\n");
  CHECK(code_of([&] { load_split(dir.path()); }) == ErrorCode::kMalformedCsv);
}

TEST_CASE("fold audits flag every kind of leakage") {
  FoldAudit a;
  a.fold = "7";
  a.test_ids = {7};
  a.training_ids = {1, 2};
  a.scaler_ids = {1, 2};
  CHECK(a.violations().empty());
  CHECK_NOTHROW(enforce_audit(a));
  a.scaler_ids.insert(7);
  CHECK(a.violations().size() == 1);
  a.training_ids.insert(7);
  a.augmented_test_segments = 2;
  CHECK(a.violations().size() == 3);
  CHECK(code_of([&] { enforce_audit(a); }) == ErrorCode::kLeakageDetected);
}

TEST_CASE("segment sets honor augmentation and verdict flipping") {
  const EvalCorpus& c = augmented_corpus();
  const auto ids = c.ids();
  const SegmentSet orig = build_segment_set(c, ids, false);
  const SegmentSet all = build_segment_set(c, ids, true);
  CHECK(all.size() == 7 * orig.size());
  for (const auto& e : orig) CHECK(e.original());
  const SegmentSet flipped = build_segment_set(c, ids, false, true);
  for (std::size_t i = 0; i < orig.size(); ++i) CHECK(flipped[i].llm == 1.0 - orig[i].llm);
  CHECK_NOTHROW(check_llm_consistency(all));
  CHECK(c.t_frames() == 247);
  CHECK(code_of([&] { build_segment_set(c, {4242}, false); }) == ErrorCode::kMissingFeatures);
}

TEST_CASE("leave-one-subject-out trains one audited model per interview") {
  const EvalCorpus& c = augmented_corpus();
  const EvalReport r = run_losocv(c, quick_options());
  CHECK(r.audits.size() == 6);
  CHECK(r.predictions.size() == 6);
  CHECK(r.matrix.total() == 6);
  CHECK(r.majority_matrix.total() == 6);
  REQUIRE(r.flipped_matrix.has_value());
  for (std::size_t i = 0; i < r.audits.size(); ++i) {
    const FoldAudit& a = r.audits[i];
    CHECK(a.violations().empty());
    CHECK(a.test_ids.size() == 1);
    const int held_out = *a.test_ids.begin();
    CHECK(a.training_ids.count(held_out) == 0);
    CHECK(a.scaler_ids.count(held_out) == 0);
    CHECK(a.training_ids.size() == 5);
    CHECK(a.augmented_training_segments > 0);
    CHECK(a.augmented_test_segments == 0);
    CHECK(a.test_segments == c.interview(held_out).segment_count);
    CHECK(a.epochs_run == 2);
  }
  for (std::size_t i = 1; i < r.predictions.size(); ++i) {
    CHECK(r.predictions[i - 1].interview_id < r.predictions[i].interview_id);
  }
  // Same seed, same table.
  const EvalReport again = run_losocv(c, quick_options());
  for (std::size_t i = 0; i < r.predictions.size(); ++i) {
    CHECK(again.predictions[i].confidence == r.predictions[i].confidence);
  }
  // Worker count does not change results.
  EvalOptions par = quick_options();
  par.workers = 3;
  const EvalReport parallel = run_losocv(c, par);
  for (std::size_t i = 0; i < r.predictions.size(); ++i) {
    CHECK(parallel.predictions[i].confidence == r.predictions[i].confidence);
  }

  TempDir dir;
  r.write(dir.path());
  for (const char* f : {"report.txt", "metrics.json", "predictions.csv", "audit.csv"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  const auto j = nlohmann::json::parse(read_text_file(dir / "metrics.json"));
  CHECK(j["interviews"] == 6);
  CHECK(j["models_trained"] == 6);
  CHECK(j.contains("majority_matrix"));
  CHECK(j.contains("flipped_matrix"));
}

TEST_CASE("leave-one-subject-out needs three interviews") {
  EvalCorpus c = augmented_corpus();
  c.interviews.resize(2);
  CHECK(code_of([&] { run_losocv(c, quick_options()); }) == ErrorCode::kInsufficientCorpus);
}

TEST_CASE("split protocol trains once, validates on originals and scores the test split") {
  const EvalCorpus& c = augmented_corpus();
  const SplitDefinition split{{1000, 1001, 1002, 1003}, {1004}, {1005}};
  EvalOptions o = quick_options();
  o.max_epochs = 4;
  const EvalReport r = run_avec(c, split, o);
  CHECK(r.audits.size() == 1);
  CHECK(r.matrix.total() == 1);
  const FoldAudit& a = r.audits[0];
  CHECK(a.violations().empty());
  CHECK(a.validation_ids == std::set<int>{1004});
  CHECK(a.training_ids == std::set<int>{1000, 1001, 1002, 1003});
  CHECK(a.augmented_test_segments == 0);
  CHECK(a.epochs_run >= 1);
  CHECK(a.epochs_run <= 4);
  const EvalReport again = run_avec(c, split, o);
  CHECK(again.predictions[0].confidence == r.predictions[0].confidence);

  CHECK(code_of([&] { run_avec(c, SplitDefinition{{1000, 1001}, {1002}, {}}, o); }) == ErrorCode::kValidation);
  CHECK(code_of([&] { run_avec(c, SplitDefinition{{1000, 1001}, {1002}, {9999}}, o); }) == ErrorCode::kMissingFeatures);
}
