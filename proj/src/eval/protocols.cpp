// SPDX-License-Identifier: Apache-2.0
#include "eval/protocols.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <thread>

#include "common/error.hpp"
#include "common/fs.hpp"

namespace depscreen {

const InterviewFeatures& EvalCorpus::interview(int id) const {
  for (const auto& iv : interviews) {
    if (iv.interview_id == id) return iv;
  }
  fail(ErrorCode::kMissingFeatures, "no features for interview " + std::to_string(id));
}

std::vector<int> EvalCorpus::ids() const {
  std::vector<int> out;
  for (const auto& iv : interviews) out.push_back(iv.interview_id);
  std::sort(out.begin(), out.end());
  return out;
}

int EvalCorpus::t_frames() const {
  long t = -1;
  for (const auto& iv : interviews) {
    for (const auto& s : iv.segments) {
      if (t < 0) t = s.mfcc->rows();
      if (s.mfcc->rows() != t) fail(ErrorCode::kShapeMismatch, "segments disagree on MFCC frame count");
    }
  }
  if (t < 0) fail(ErrorCode::kMissingFeatures, "corpus has no segments");
  return static_cast<int>(t);
}

int EvalCorpus::n_mfcc() const {
  for (const auto& iv : interviews) {
    if (!iv.segments.empty()) return static_cast<int>(iv.segments.front().mfcc->cols());
  }
  fail(ErrorCode::kMissingFeatures, "corpus has no segments");
}

SegmentSet build_segment_set(const EvalCorpus& corpus, const std::vector<int>& ids, bool include_augmented,
                             bool flip_llm) {
  SegmentSet out;
  for (int id : ids) {
    const InterviewFeatures& iv = corpus.interview(id);
    const auto v = corpus.llm_verdicts.find(id);
    if (v == corpus.llm_verdicts.end()) fail(ErrorCode::kMissingFeatures, "no text verdict for interview " + std::to_string(id));
    const double llm = flip_llm ? 1.0 - v->second : static_cast<double>(v->second);
    for (const auto& s : iv.segments) {
      if (!include_augmented && !s.original()) continue;
      out.push_back(SegmentExample{s.interview_id, s.segment_index, s.tag, iv.label, llm, s.mfcc, s.fau});
    }
  }
  return out;
}

void SplitDefinition::validate(const std::set<int>& exemplar_ids) const {
  if (test_ids.empty()) fail(ErrorCode::kValidation, "test split is empty");
  if (train_ids.empty()) fail(ErrorCode::kValidation, "train split is empty");
  std::set<int> seen;
  for (const auto* part : {&train_ids, &validation_ids, &test_ids}) {
    for (int id : *part) {
      if (!seen.insert(id).second) fail(ErrorCode::kLeakageDetected, "interview " + std::to_string(id) + " is in two splits");
    }
  }
  for (int id : test_ids) {
    if (exemplar_ids.count(id) != 0) fail(ErrorCode::kLeakageDetected, "few-shot exemplar " + std::to_string(id) + " is in the test split");
  }
}

namespace {

std::vector<int> read_split_ids(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::vector<int> ids;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const std::string cell = trim(split(line, ',').front());
    char* end = nullptr;
    const long v = std::strtol(cell.c_str(), &end, 10);
    if (end == cell.c_str() || *end != '\0') {
      if (first) {
        first = false;
        continue;  // header
      }
      fail(ErrorCode::kMalformedCsv, path.string() + ": bad participant id '" + cell + "'");
    }
    first = false;
    ids.push_back(static_cast<int>(v));
  }
  return ids;
}

std::filesystem::path first_existing(const std::filesystem::path& dir, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    if (std::filesystem::exists(dir / n)) return dir / n;
  }
  fail(ErrorCode::kMissingFile, "no split file in " + dir.string() + " (tried " + *names.begin() + ", ...)");
}

}  // namespace

SplitDefinition load_split(const std::filesystem::path& train_csv, const std::filesystem::path& validation_csv,
                           const std::filesystem::path& test_csv) {
  SplitDefinition s;
  s.train_ids = read_split_ids(train_csv);
  s.validation_ids = read_split_ids(validation_csv);
  s.test_ids = read_split_ids(test_csv);
  return s;
}

SplitDefinition load_split(const std::filesystem::path& dir) {
  return load_split(first_existing(dir, {"train_split_Depression_AVEC2017.csv", "train_split.csv"}),
                    first_existing(dir, {"dev_split_Depression_AVEC2017.csv", "dev_split.csv"}),
                    first_existing(dir, {"full_test_split.csv", "test_split_Depression_AVEC2017.csv", "test_split.csv"}));
}

void write_split_csv(const std::filesystem::path& path, const std::vector<int>& ids,
                     const std::map<int, std::pair<int, int>>& label_and_score) {
  std::ostringstream out;
  out << "Participant_ID,PHQ8_Binary,PHQ8_Score\n";
  for (int id : ids) {
    out << id;
    const auto it = label_and_score.find(id);
    if (it != label_and_score.end()) out << ',' << it->second.first << ',' << it->second.second;
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

std::vector<std::string> FoldAudit::violations() const {
  std::vector<std::string> out;
  for (int id : test_ids) {
    if (training_ids.count(id)) out.push_back("fold " + fold + ": test interview " + std::to_string(id) + " in training inputs");
    if (scaler_ids.count(id)) out.push_back("fold " + fold + ": test interview " + std::to_string(id) + " in scaler-fitting inputs");
    if (validation_ids.count(id)) out.push_back("fold " + fold + ": test interview " + std::to_string(id) + " in validation inputs");
  }
  if (augmented_test_segments != 0) {
    out.push_back("fold " + fold + ": " + std::to_string(augmented_test_segments) + " augmented segments evaluated");
  }
  return out;
}

void enforce_audit(const FoldAudit& audit) {
  const auto v = audit.violations();
  if (v.empty()) return;
  std::string msg;
  for (const auto& s : v) msg += (msg.empty() ? "" : "; ") + s;
  fail(ErrorCode::kLeakageDetected, msg);
}

namespace {

struct FoldResult {
  std::vector<InterviewPrediction> predictions;
  FoldAudit audit;
};

std::uint64_t fold_seed(std::uint64_t base, const std::string& fold) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : fold) h = (h ^ c) * 1099511628211ULL;
  return derive_seed(base, {h});
}

FoldResult run_fold(const EvalCorpus& corpus, const std::string& fold, const std::vector<int>& train_ids,
                    const std::vector<int>& validation_ids, const std::vector<int>& test_ids,
                    const EvalOptions& options) {
  FoldResult r;
  FoldAudit& audit = r.audit;
  audit.fold = fold;
  audit.test_ids.insert(test_ids.begin(), test_ids.end());

  const SegmentSet train_set = build_segment_set(corpus, train_ids, true);
  const SegmentSet val_set = build_segment_set(corpus, validation_ids, false);
  std::vector<int> labels;
  for (const auto& e : train_set) labels.push_back(e.label);

  const std::uint64_t seed = fold_seed(options.seed, fold);
  FusionModel model(options.hyperparams, corpus.t_frames(), seed, corpus.n_mfcc());
  TrainOptions topt;
  topt.max_epochs = options.max_epochs;
  topt.patience = options.patience;
  topt.seed = seed;
  const TrainResult tr = train(model, train_set, val_set.empty() ? nullptr : &val_set, class_weights(labels), topt);
  audit.training_ids = tr.audit.training_ids;
  audit.scaler_ids = tr.audit.scaler_ids;
  audit.validation_ids = tr.audit.validation_ids;
  audit.training_segments = tr.audit.training_segments;
  audit.augmented_training_segments = tr.audit.augmented_segments;
  audit.epochs_run = static_cast<int>(tr.history.epochs.size());

  const SegmentSet test_set = build_segment_set(corpus, test_ids, false);
  for (const auto& e : test_set) {
    ++audit.test_segments;
    if (!e.original()) ++audit.augmented_test_segments;
  }
  enforce_audit(audit);

  const std::vector<double> probs = predict_segments(model, test_set);
  std::vector<double> flipped_probs;
  if (options.llm_flip_ablation) flipped_probs = predict_segments(model, build_segment_set(corpus, test_ids, false, true));

  for (int id : test_ids) {
    std::vector<double> p, fp;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
      if (test_set[i].interview_id != id) continue;
      p.push_back(probs[i]);
      if (!flipped_probs.empty()) fp.push_back(flipped_probs[i]);
    }
    if (p.empty()) fail(ErrorCode::kMissingFeatures, "test interview " + std::to_string(id) + " has no segments");
    InterviewPrediction pred;
    pred.interview_id = id;
    pred.label = corpus.interview(id).label;
    pred.llm = corpus.llm_verdicts.at(id);
    pred.segments = p.size();
    const InterviewDecision d = aggregate_interview(p);
    pred.confidence = d.confidence;
    pred.diagnosis = d.diagnosis;
    pred.majority = d.majority;
    if (!fp.empty()) pred.flipped_confidence = aggregate_interview(fp).confidence;
    r.predictions.push_back(pred);
  }
  return r;
}

void finalize(EvalReport& report, const EvalOptions& options) {
  std::sort(report.predictions.begin(), report.predictions.end(),
            [](const auto& a, const auto& b) { return a.interview_id < b.interview_id; });
  bool any_flip = false;
  ConfusionMatrix flipped;
  for (const auto& p : report.predictions) {
    if (p.label != 0 && p.label != 1) fail(ErrorCode::kValidation, "test interview without a label");
    const bool actual = p.label == 1;
    report.matrix.add(p.diagnosis == Label::kDepressed, actual);
    report.majority_matrix.add(p.majority == Label::kDepressed, actual);
    if (p.flipped_confidence) {
      any_flip = true;
      flipped.add(*p.flipped_confidence >= 0.5, actual);
    }
  }
  if (any_flip) report.flipped_matrix = flipped;
  report.metrics = compute_metrics(report.matrix);
  report.hyperparams = options.hyperparams;
}

std::string matrix_text(const ConfusionMatrix& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "                 pred D   pred ND\n"
                "  actual D     %7ld   %7ld\n"
                "  actual ND    %7ld   %7ld\n",
                m.tp, m.fn, m.fp, m.tn);
  return buf;
}

nlohmann::json matrix_json(const ConfusionMatrix& m) {
  return {{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn}};
}

}  // namespace

EvalReport run_losocv(const EvalCorpus& corpus, const EvalOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<int> ids = corpus.ids();
  if (ids.size() < 3) fail(ErrorCode::kInsufficientCorpus, "leave-one-subject-out needs at least 3 interviews");
  corpus.t_frames();

  std::vector<FoldResult> results(ids.size());
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t i = next++; i < ids.size(); i = next++) {
      try {
        std::vector<int> train_ids;
        for (int id : ids) {
          if (id != ids[i]) train_ids.push_back(id);
        }
        results[i] = run_fold(corpus, std::to_string(ids[i]), train_ids, {}, {ids[i]}, options);
        if (options.progress) {
          std::lock_guard lock(progress_mutex);
          const auto& p = results[i].predictions.front();
          char buf[160];
          std::snprintf(buf, sizeof(buf), "fold %zu/%zu: interview %d label %d confidence %.4f", i + 1, ids.size(),
                        p.interview_id, p.label, p.confidence);
          options.progress(buf);
        }
      } catch (...) {
        std::lock_guard lock(progress_mutex);
        if (!error) error = std::current_exception();
        next = ids.size();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(ids.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  EvalReport report;
  report.protocol = "losocv";
  for (auto& r : results) {
    report.predictions.insert(report.predictions.end(), r.predictions.begin(), r.predictions.end());
    report.audits.push_back(std::move(r.audit));
  }
  finalize(report, options);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

EvalReport run_avec(const EvalCorpus& corpus, const SplitDefinition& split, const EvalOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  split.validate();
  const auto present = corpus.ids();
  for (const auto* part : {&split.train_ids, &split.validation_ids, &split.test_ids}) {
    for (int id : *part) {
      if (!std::binary_search(present.begin(), present.end(), id)) {
        fail(ErrorCode::kMissingFeatures, "split interview " + std::to_string(id) + " has no features");
      }
    }
  }
  FoldResult r = run_fold(corpus, "avec", split.train_ids, split.validation_ids, split.test_ids, options);
  EvalReport report;
  report.protocol = "avec";
  report.predictions = std::move(r.predictions);
  report.audits.push_back(std::move(r.audit));
  finalize(report, options);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  out << "protocol: " << protocol << "\n";
  out << "interviews: " << matrix.total() << "\n";
  out << "models trained: " << audits.size() << "\n\n";
  out << "confusion matrix (mean segment probability >= 0.5):\n" << matrix_text(matrix) << "\n";
  out << "precision D   " << metrics.precision_d.percent() << "\n";
  out << "precision ND  " << metrics.precision_nd.percent() << "\n";
  out << "recall D      " << metrics.recall_d.percent() << "\n";
  out << "recall ND     " << metrics.recall_nd.percent() << "\n";
  out << "F1 D          " << metrics.f1_d.percent() << "\n";
  out << "accuracy      " << metrics.accuracy.percent() << "\n\n";
  out << "confusion matrix (segment majority vote):\n" << matrix_text(majority_matrix);
  out << "accuracy      " << compute_metrics(majority_matrix).accuracy.percent() << "\n\n";
  if (flipped_matrix) {
    out << "text-verdict flipped (same models):\n" << matrix_text(*flipped_matrix);
    out << "accuracy      " << compute_metrics(*flipped_matrix).accuracy.percent() << "\n\n";
  }
  for (const auto& w : warnings) out << "warning: " << w << "\n";
  out << "interview  label  text  segments  confidence  diagnosis  majority  flipped_confidence\n";
  for (const auto& p : predictions) {
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%9d  %5d  %4d  %8zu  %10.4f  %9d  %8d  ", p.interview_id, p.label, p.llm, p.segments,
                  p.confidence, label_bit(p.diagnosis), label_bit(p.majority));
    out << buf;
    if (p.flipped_confidence) {
      std::snprintf(buf, sizeof(buf), "%.4f", *p.flipped_confidence);
      out << buf;
    }
    out << "\n";
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "\nwall time: %.1f s\n", seconds);
  out << buf;
  return out.str();
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["protocol"] = protocol;
  j["interviews"] = matrix.total();
  j["models_trained"] = audits.size();
  j["matrix"] = matrix_json(matrix);
  j["metrics"] = metrics.to_json();
  j["majority_matrix"] = matrix_json(majority_matrix);
  j["majority_metrics"] = compute_metrics(majority_matrix).to_json();
  if (flipped_matrix) {
    j["flipped_matrix"] = matrix_json(*flipped_matrix);
    j["flipped_metrics"] = compute_metrics(*flipped_matrix).to_json();
  }
  j["hyperparams"] = hyperparams.to_json();
  j["warnings"] = warnings;
  j["seconds"] = seconds;
  nlohmann::json preds = nlohmann::json::array();
  for (const auto& p : predictions) {
    nlohmann::json e{{"interview_id", p.interview_id}, {"label", p.label},           {"llm", p.llm},
                     {"segments", p.segments},         {"confidence", p.confidence}, {"diagnosis", label_bit(p.diagnosis)},
                     {"majority", label_bit(p.majority)}};
    if (p.flipped_confidence) e["flipped_confidence"] = *p.flipped_confidence;
    preds.push_back(e);
  }
  j["predictions"] = preds;
  return j;
}

void EvalReport::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "report.txt", to_text());
  write_file_atomic(dir / "metrics.json", to_json().dump(2) + "\n");
  std::ostringstream preds;
  preds << "interview_id,label,llm,segments,confidence,diagnosis,majority,flipped_confidence\n";
  for (const auto& p : predictions) {
    preds << p.interview_id << ',' << p.label << ',' << p.llm << ',' << p.segments << ',' << p.confidence << ','
          << label_bit(p.diagnosis) << ',' << label_bit(p.majority) << ',';
    if (p.flipped_confidence) preds << *p.flipped_confidence;
    preds << '\n';
  }
  write_file_atomic(dir / "predictions.csv", preds.str());
  std::ostringstream audit;
  audit << "fold,test_ids,training_interviews,scaler_interviews,validation_interviews,training_segments,"
           "augmented_training_segments,test_segments,augmented_test_segments,epochs_run,violations\n";
  for (const auto& a : audits) {
    std::string tests;
    for (int id : a.test_ids) tests += (tests.empty() ? "" : " ") + std::to_string(id);
    audit << a.fold << ',' << tests << ',' << a.training_ids.size() << ',' << a.scaler_ids.size() << ','
          << a.validation_ids.size() << ',' << a.training_segments << ',' << a.augmented_training_segments << ','
          << a.test_segments << ',' << a.augmented_test_segments << ',' << a.epochs_run << ','
          << a.violations().size() << '\n';
  }
  write_file_atomic(dir / "audit.csv", audit.str());
}

}  // namespace depscreen
