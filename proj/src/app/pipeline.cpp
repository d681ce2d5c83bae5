// SPDX-License-Identifier: Apache-2.0
#include "app/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <sstream>

#include "common/error.hpp"
#include "common/fs.hpp"
#include "corpus/corpus.hpp"
#include "corpus/synth.hpp"

namespace depscreen {
namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::filesystem::path shipped(const char* name) { return std::filesystem::path(DEPSCREEN_DATA_DIR) / name; }

}  // namespace

std::shared_ptr<LlmBackend> make_backend(const LlmSettings& s) {
  if (s.backend == "stub") return std::make_shared<StubBackend>();
  if (s.backend == "remote") {
    const char* key = std::getenv(kLlmApiKeyEnv);
    if (key == nullptr || *key == '\0') {
      fail(ErrorCode::kAuthFailure, std::string("remote LLM backend needs ") + kLlmApiKeyEnv);
    }
    RemoteBackendConfig cfg;
    cfg.base_url = s.base_url;
    cfg.model = s.model;
    cfg.api_key = key;
    cfg.requests_per_minute = s.requests_per_minute;
    cfg.timeout_seconds = s.timeout_seconds;
    return std::make_shared<RemoteBackend>(cfg);
  }
  fail(ErrorCode::kValidation, "unknown LLM backend '" + s.backend + "'");
}

PipelineContext make_context(const AppConfig& config, const std::filesystem::path& corpus_root,
                             std::shared_ptr<LlmBackend> backend) {
  PipelineContext ctx;
  ctx.config = config;
  ctx.acronyms = AcronymTable::load(config.acronyms_path.empty() ? shipped("acronyms.tsv")
                                                                  : std::filesystem::path(config.acronyms_path));

  std::filesystem::path manifest = config.manifest_path;
  if (manifest.empty() && !corpus_root.empty() && std::filesystem::exists(corpus_root / "error_manifest.json")) {
    manifest = corpus_root / "error_manifest.json";
  }
  if (manifest.empty()) manifest = shipped("error_manifest.json");
  ctx.manifest = read_error_manifest(manifest);

  std::filesystem::path exemplars = config.exemplar_dir;
  if (exemplars.empty() && !corpus_root.empty()) exemplars = corpus_root / "exemplars";
  if (!exemplars.empty() && std::filesystem::is_directory(exemplars)) {
    ctx.exemplars = load_exemplars(exemplars, ctx.acronyms);
  }

  LlmOptions opt;
  opt.max_retries = config.llm.max_retries;
  opt.backoff_initial_seconds = config.llm.backoff_initial_seconds;
  opt.cache_dir = config.llm.cache_dir;
  ctx.classifier = std::make_shared<LlmClassifier>(backend ? backend : make_backend(config.llm), opt);
  return ctx;
}

PreparedInterview prepare_interview(const Interview& raw, const PipelineContext& ctx) {
  PreparedInterview p;
  p.interview = apply_error_manifest(raw, ctx.manifest);
  p.dialogue = render_dialogue(normalize_transcript(p.interview.utterances, ctx.acronyms));
  return p;
}

std::vector<PreparedInterview> prepare_corpus(const std::filesystem::path& root, const PipelineContext& ctx,
                                              bool require_labels) {
  std::vector<PreparedInterview> out;
  LoadOptions lo;
  lo.require_label = require_labels;
  for (int id : list_interview_ids(root)) out.push_back(prepare_interview(load_interview(root, id, lo), ctx));
  if (out.empty()) fail(ErrorCode::kMissingFile, "no <id>_P interview directories under " + root.string());
  return out;
}

void write_prepared(const std::filesystem::path& out, const std::vector<PreparedInterview>& prepared,
                    const std::filesystem::path& exemplar_source) {
  std::vector<Interview> interviews;
  for (const auto& p : prepared) interviews.push_back(p.interview);
  std::vector<Interview> exemplars;
  if (!exemplar_source.empty() && std::filesystem::is_directory(exemplar_source)) {
    for (int id : list_interview_ids(exemplar_source)) exemplars.push_back(load_interview(exemplar_source, id));
  }
  write_corpus(out, interviews, exemplars);
  for (const auto& p : prepared) {
    write_file_atomic(interview_paths(out, p.interview.id).dir / (std::to_string(p.interview.id) + "_DIALOGUE.txt"),
                      p.dialogue + "\n");
  }
}

std::vector<InterviewFeatures> extract_corpus_features(const std::vector<PreparedInterview>& prepared,
                                                       const FeatureConfig& cfg, std::uint64_t seed) {
  std::vector<InterviewFeatures> out;
  out.reserve(prepared.size());
  for (const auto& p : prepared) out.push_back(extract_interview_features(p.interview, cfg, seed));
  return out;
}

std::map<int, LlmVerdict> classify_interviews(const std::vector<PreparedInterview>& prepared,
                                              const PipelineContext& ctx) {
  std::map<int, LlmVerdict> out;
  for (const auto& p : prepared) {
    out[p.interview.id] = ctx.classifier->classify(build_prompt(p.dialogue, ctx.exemplars, p.interview.id));
  }
  return out;
}

void write_verdicts(const std::filesystem::path& path, const std::map<int, LlmVerdict>& verdicts) {
  std::ostringstream out;
  out << "interview_id,diagnosis,backend,cached,malformed_retries\n";
  for (const auto& [id, v] : verdicts) {
    out << id << ',' << label_bit(v.diagnosis) << ',' << v.backend_id << ',' << (v.cached ? 1 : 0) << ','
        << v.malformed_retries << '\n';
  }
  write_file_atomic(path, out.str());
}

std::map<int, int> read_verdicts(const std::filesystem::path& path) {
  std::map<int, int> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() < 2) fail(ErrorCode::kMalformedCsv, path.string() + ": short row");
    const int bit = parse_int(cells[1], "diagnosis");
    if (bit != 0 && bit != 1) fail(ErrorCode::kMalformedCsv, path.string() + ": diagnosis must be 0 or 1");
    out[parse_int(cells[0], "interview_id")] = bit;
  }
  return out;
}

std::map<int, int> verdict_bits(const std::map<int, LlmVerdict>& verdicts) {
  std::map<int, int> out;
  for (const auto& [id, v] : verdicts) out[id] = label_bit(v.diagnosis);
  return out;
}

EvalCorpus make_eval_corpus(std::vector<InterviewFeatures> features, const std::map<int, int>& verdicts) {
  EvalCorpus c;
  for (const auto& f : features) {
    if (verdicts.find(f.interview_id) == verdicts.end()) {
      fail(ErrorCode::kMissingFeatures, "no text verdict for interview " + std::to_string(f.interview_id));
    }
  }
  c.interviews = std::move(features);
  c.llm_verdicts = verdicts;
  return c;
}

std::unique_ptr<FusionModel> train_full_model(const EvalCorpus& corpus, const FusionHyperparams& h, int epochs,
                                              std::uint64_t seed, TrainHistory* history) {
  const SegmentSet set = build_segment_set(corpus, corpus.ids(), true);
  std::vector<int> labels;
  for (const auto& e : set) labels.push_back(e.label);
  auto model = std::make_unique<FusionModel>(h, corpus.t_frames(), seed, corpus.n_mfcc());
  TrainOptions opt;
  opt.max_epochs = epochs;
  opt.seed = seed;
  TrainResult r = train(*model, set, nullptr, class_weights(labels), opt);
  if (history != nullptr) *history = std::move(r.history);
  return model;
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kPreprocessing: return "preprocessing";
    case Stage::kFeatures: return "features";
    case Stage::kLlm: return "llm";
    case Stage::kInference: return "inference";
    case Stage::kReporting: return "reporting";
  }
  return "unknown";
}

std::filesystem::path resolve_recording_root(const std::filesystem::path& source, int interview_id) {
  const std::string dir_name = std::to_string(interview_id) + "_P";
  if (std::filesystem::is_directory(source / dir_name)) return source;
  if (source.filename() == dir_name && std::filesystem::is_directory(source)) return source.parent_path();
  fail(ErrorCode::kMissingFile, "no recording for interview " + std::to_string(interview_id) + " at " + source.string());
}

RecordingResult process_recording(const std::filesystem::path& source, int interview_id, FusionModel& model,
                                  const PipelineContext& ctx, const std::string& report_id,
                                  const std::function<void(Stage)>& on_stage) {
  RecordingResult r;
  const auto t_total = std::chrono::steady_clock::now();
  Stage stage = Stage::kPreprocessing;
  auto enter = [&](Stage s) {
    stage = s;
    if (on_stage) on_stage(s);
  };
  try {
    enter(Stage::kPreprocessing);
    auto t0 = std::chrono::steady_clock::now();
    LoadOptions lo;
    lo.require_label = false;
    const PreparedInterview prepared =
        prepare_interview(load_interview(resolve_recording_root(source, interview_id), interview_id, lo), ctx);
    r.timings.preprocessing = seconds_since(t0);

    enter(Stage::kFeatures);
    t0 = std::chrono::steady_clock::now();
    FeatureConfig fc = ctx.config.features;
    fc.augmentation = false;
    const InterviewFeatures features = extract_interview_features(prepared.interview, fc, ctx.config.seed);
    r.timings.features = seconds_since(t0);

    enter(Stage::kLlm);
    t0 = std::chrono::steady_clock::now();
    r.verdict = ctx.classifier->classify(build_prompt(prepared.dialogue, ctx.exemplars, interview_id));
    r.timings.llm = seconds_since(t0);

    enter(Stage::kInference);
    t0 = std::chrono::steady_clock::now();
    SegmentSet set;
    const double llm = label_bit(r.verdict.diagnosis);
    for (const auto& s : features.segments) {
      set.push_back(SegmentExample{s.interview_id, s.segment_index, s.tag, 0, llm, s.mfcc, s.fau});
    }
    r.segments = set.size();
    r.decision = aggregate_interview(predict_segments(model, set));
    r.timings.inference = seconds_since(t0);

    enter(Stage::kReporting);
    t0 = std::chrono::steady_clock::now();
    LlmVerdict fused = r.verdict;
    fused.diagnosis = r.decision.diagnosis;
    r.report = ctx.classifier->generate_report(prepared.dialogue, fused, r.decision.confidence, report_id);
    r.timings.reporting = seconds_since(t0);
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  } catch (const std::exception& e) {
    throw StageError(stage, Error(ErrorCode::kIo, e.what()));
  }
  r.timings.total = seconds_since(t_total);
  return r;
}

}  // namespace depscreen
