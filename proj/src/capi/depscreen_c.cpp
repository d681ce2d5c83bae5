// SPDX-License-Identifier: Apache-2.0
#include "depscreen/depscreen.h"

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <string>

#include "app/config.hpp"
#include "app/deployment.hpp"
#include "app/pipeline.hpp"
#include "app/service.hpp"
#include "app/simulator.hpp"
#include "common/error.hpp"
#include "common/fs.hpp"
#include "corpus/synth.hpp"
#include "eval/metrics.hpp"
#include "eval/protocols.hpp"
#include "features/features.hpp"
#include "tuning/hyperband.hpp"

using depscreen::ErrorCode;

#define DS_CHECK_CODE(c, s) static_assert(static_cast<int>(ErrorCode::c) == static_cast<int>(s))
DS_CHECK_CODE(kMissingFile, DS_ERR_MISSING_FILE);
DS_CHECK_CODE(kMalformedCsv, DS_ERR_MALFORMED_CSV);
DS_CHECK_CODE(kSampleRateMismatch, DS_ERR_SAMPLE_RATE_MISMATCH);
DS_CHECK_CODE(kIntervalOutOfRange, DS_ERR_INTERVAL_OUT_OF_RANGE);
DS_CHECK_CODE(kInconsistentOverride, DS_ERR_INCONSISTENT_OVERRIDE);
DS_CHECK_CODE(kInvalidFraction, DS_ERR_INVALID_FRACTION);
DS_CHECK_CODE(kUnknownSpeaker, DS_ERR_UNKNOWN_SPEAKER);
DS_CHECK_CODE(kNoPatientSpeech, DS_ERR_NO_PATIENT_SPEECH);
DS_CHECK_CODE(kTooShort, DS_ERR_TOO_SHORT);
DS_CHECK_CODE(kTooFewFrames, DS_ERR_TOO_FEW_FRAMES);
DS_CHECK_CODE(kAlignmentGap, DS_ERR_ALIGNMENT_GAP);
DS_CHECK_CODE(kEmptyTrainingSet, DS_ERR_EMPTY_TRAINING_SET);
DS_CHECK_CODE(kUnbalancedExemplars, DS_ERR_UNBALANCED_EXEMPLARS);
DS_CHECK_CODE(kValidation, DS_ERR_VALIDATION);
DS_CHECK_CODE(kBackendUnavailable, DS_ERR_BACKEND_UNAVAILABLE);
DS_CHECK_CODE(kMalformedAfterRetries, DS_ERR_MALFORMED_AFTER_RETRIES);
DS_CHECK_CODE(kAuthFailure, DS_ERR_AUTH_FAILURE);
DS_CHECK_CODE(kShapeMismatch, DS_ERR_SHAPE_MISMATCH);
DS_CHECK_CODE(kSingleClass, DS_ERR_SINGLE_CLASS);
DS_CHECK_CODE(kLeakageDetected, DS_ERR_LEAKAGE_DETECTED);
DS_CHECK_CODE(kNonFiniteLoss, DS_ERR_NON_FINITE_LOSS);
DS_CHECK_CODE(kEmptyInput, DS_ERR_EMPTY_INPUT);
DS_CHECK_CODE(kEmptySpace, DS_ERR_EMPTY_SPACE);
DS_CHECK_CODE(kDegenerateDenominator, DS_ERR_DEGENERATE_DENOMINATOR);
DS_CHECK_CODE(kMissingFeatures, DS_ERR_MISSING_FEATURES);
DS_CHECK_CODE(kInsufficientCorpus, DS_ERR_INSUFFICIENT_CORPUS);
DS_CHECK_CODE(kInvalidSignature, DS_ERR_INVALID_SIGNATURE);
DS_CHECK_CODE(kMalformedPayload, DS_ERR_MALFORMED_PAYLOAD);
DS_CHECK_CODE(kQueueFull, DS_ERR_QUEUE_FULL);
DS_CHECK_CODE(kNotFound, DS_ERR_NOT_FOUND);
DS_CHECK_CODE(kIo, DS_ERR_IO);
DS_CHECK_CODE(kInvalidArgument, DS_ERR_INVALID_ARGUMENT);
#undef DS_CHECK_CODE

struct ds_config {
  depscreen::AppConfig config;
};

struct ds_model {
  std::shared_ptr<depscreen::FusionModel> model;
  std::string path;
};

struct ds_service {
  std::shared_ptr<const depscreen::PipelineContext> ctx;
  std::unique_ptr<depscreen::InferenceService> service;
};

namespace {

thread_local std::string g_last_error;

std::mutex g_log_mutex;
ds_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

void log_line(const std::string& line) {
  std::lock_guard lock(g_log_mutex);
  if (g_log_fn != nullptr) g_log_fn(line.c_str(), g_log_user);
}

template <typename Fn>
ds_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return DS_OK;
  } catch (const depscreen::Error& e) {
    g_last_error = e.what();
    return static_cast<ds_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return DS_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DS_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) depscreen::fail(ErrorCode::kInvalidArgument, what);
}

std::filesystem::path path_arg(const char* p, const char* name) {
  require(p != nullptr && *p != '\0', name);
  return std::filesystem::path(p);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put_json(char** out, const nlohmann::json& j) {
  if (out != nullptr) *out = dup_string(j.dump(2));
}

depscreen::EvalCorpus load_eval_corpus(const char* features_dir, const char* verdicts_csv) {
  return depscreen::make_eval_corpus(depscreen::read_feature_store(path_arg(features_dir, "features_dir")),
                                     depscreen::read_verdicts(path_arg(verdicts_csv, "verdicts_csv")));
}

depscreen::EvalOptions eval_options(const depscreen::AppConfig& c) {
  depscreen::EvalOptions o;
  o.hyperparams = c.hyperparams;
  o.max_epochs = c.max_epochs;
  o.patience = c.patience;
  o.seed = c.seed;
  o.workers = c.eval_workers;
  o.progress = log_line;
  return o;
}

std::optional<double> figure(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_number()) depscreen::fail(ErrorCode::kValidation, std::string("reported ") + key + " must be a number");
  return j[key].get<double>();
}

depscreen::ReportedFigures reported_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (name == "losocv") return depscreen::published_losocv_figures();
    if (name == "avec") return depscreen::published_avec_figures();
    depscreen::fail(ErrorCode::kValidation, "unknown published row '" + name + "'");
  }
  if (!j.is_object()) depscreen::fail(ErrorCode::kValidation, "reported figures must be an object or a row name");
  depscreen::ReportedFigures r;
  r.label = j.value("label", std::string("reported"));
  r.precision_d = figure(j, "precision_d");
  r.precision_nd = figure(j, "precision_nd");
  r.recall_d = figure(j, "recall_d");
  r.recall_nd = figure(j, "recall_nd");
  r.f1_d = figure(j, "f1_d");
  r.accuracy = figure(j, "accuracy");
  return r;
}

nlohmann::json history_json(const depscreen::TrainHistory& h) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : h.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"train_accuracy", e.train_accuracy}});
  }
  return {{"epochs", epochs}, {"epochs_run", h.epochs.size()}};
}

}  // namespace

extern "C" {

const char* ds_version(void) { return "1.0.0"; }

const char* ds_status_name(ds_status status) {
  if (status == DS_OK) return "Ok";
  if (status == DS_ERR_INTERNAL) return "Internal";
  static thread_local std::string name;
  name = std::string(depscreen::error_code_name(static_cast<ErrorCode>(status)));
  return name.c_str();
}

const char* ds_last_error(void) { return g_last_error.c_str(); }

void ds_string_free(char* s) { std::free(s); }

void ds_set_log(ds_log_fn fn, void* user) {
  std::lock_guard lock(g_log_mutex);
  g_log_fn = fn;
  g_log_user = user;
}

ds_status ds_config_load(const char* path, const char* overrides_json, ds_config** out) {
  return guarded([&] {
    require(out != nullptr, "out must not be null");
    nlohmann::json raw = nlohmann::json::object();
    if (path != nullptr && *path != '\0') {
      try {
        raw = nlohmann::json::parse(depscreen::read_text_file(path));
      } catch (const nlohmann::json::exception& e) {
        depscreen::fail(ErrorCode::kValidation, std::string(path) + ": " + e.what());
      }
    }
    if (overrides_json != nullptr && *overrides_json != '\0') {
      try {
        raw.merge_patch(nlohmann::json::parse(overrides_json));
      } catch (const nlohmann::json::exception& e) {
        depscreen::fail(ErrorCode::kValidation, std::string("overrides: ") + e.what());
      }
    }
    auto c = std::make_unique<ds_config>();
    c->config = depscreen::AppConfig::from_json(raw);
    *out = c.release();
  });
}

ds_status ds_config_to_json(const ds_config* config, char** out_json) {
  return guarded([&] {
    require(config != nullptr && out_json != nullptr, "config and out_json must not be null");
    put_json(out_json, config->config.to_json());
  });
}

uint64_t ds_config_seed(const ds_config* config) { return config != nullptr ? config->config.seed : 0; }

void ds_config_free(ds_config* config) { delete config; }

ds_status ds_synth(const char* out_dir, int n, double depressed_fraction, uint64_t seed) {
  return guarded([&] {
    const auto out = path_arg(out_dir, "out_dir");
    require(n > 0, "n must be positive");
    depscreen::write_corpus(out, depscreen::synth_corpus(n, depressed_fraction, seed),
                            depscreen::synth_exemplars(seed));
    log_line("wrote " + std::to_string(n) + " synthetic interviews to " + out.string());
  });
}

ds_status ds_prep(const ds_config* config, const char* corpus_dir, const char* out_dir) {
  return guarded([&] {
    require(config != nullptr, "config must not be null");
    const auto root = path_arg(corpus_dir, "corpus_dir");
    const auto out = path_arg(out_dir, "out_dir");
    const auto ctx = depscreen::make_context(config->config, root);
    const auto prepared = depscreen::prepare_corpus(root, ctx);
    std::filesystem::path exemplars = config->config.exemplar_dir;
    if (exemplars.empty()) exemplars = root / "exemplars";
    depscreen::write_prepared(out, prepared, std::filesystem::is_directory(exemplars) ? exemplars
                                                                                        : std::filesystem::path());
    log_line("prepared " + std::to_string(prepared.size()) + " interviews into " + out.string());
  });
}

ds_status ds_features(const ds_config* config, const char* prepared_dir, const char* out_dir) {
  return guarded([&] {
    require(config != nullptr, "config must not be null");
    const auto root = path_arg(prepared_dir, "prepared_dir");
    const auto out = path_arg(out_dir, "out_dir");
    const auto ctx = depscreen::make_context(config->config, root);
    const auto prepared = depscreen::prepare_corpus(root, ctx);
    const auto features = depscreen::extract_corpus_features(prepared, config->config.features, config->config.seed);
    depscreen::write_feature_store(out, features);
    std::size_t segments = 0;
    for (const auto& f : features) segments += f.segments.size();
    log_line("extracted " + std::to_string(segments) + " segment variants from " + std::to_string(features.size()) +
             " interviews into " + out.string());
  });
}

ds_status ds_llm_classify(const ds_config* config, const char* prepared_dir, const char* out_csv) {
  return guarded([&] {
    require(config != nullptr, "config must not be null");
    const auto root = path_arg(prepared_dir, "prepared_dir");
    const auto out = path_arg(out_csv, "out_csv");
    const auto ctx = depscreen::make_context(config->config, root);
    const auto prepared = depscreen::prepare_corpus(root, ctx, false);
    const auto verdicts = depscreen::classify_interviews(prepared, ctx);
    depscreen::write_verdicts(out, verdicts);
    log_line("classified " + std::to_string(verdicts.size()) + " interviews into " + out.string());
  });
}

ds_status ds_train(const ds_config* config, const char* features_dir, const char* verdicts_csv, int epochs,
                   const char* out_checkpoint, char** out_summary_json) {
  return guarded([&] {
    require(config != nullptr, "config must not be null");
    const auto out = path_arg(out_checkpoint, "out_checkpoint");
    const auto corpus = load_eval_corpus(features_dir, verdicts_csv);
    depscreen::TrainHistory history;
    const int n_epochs = epochs > 0 ? epochs : config->config.max_epochs;
    auto model = depscreen::train_full_model(corpus, config->config.hyperparams, n_epochs, config->config.seed,
                                             &history);
    model->save(out);
    nlohmann::json summary = history_json(history);
    summary["checkpoint"] = out.string();
    summary["checksum"] = model->checksum();
    summary["hyperparams"] = config->config.hyperparams.to_json();
    log_line("trained " + std::to_string(n_epochs) + " epochs; checkpoint " + out.string());
    put_json(out_summary_json, summary);
  });
}

ds_status ds_tune(const ds_config* config, const char* features_dir, const char* verdicts_csv, const char* split_dir,
                  const char* out_dir, char** out_summary_json) {
  return guarded([&] {
    require(config != nullptr, "config must not be null");
    const auto out = path_arg(out_dir, "out_dir");
    const auto& c = config->config;
    const auto corpus = load_eval_corpus(features_dir, verdicts_csv);
    const auto split = depscreen::load_split(path_arg(split_dir, "split_dir"));
    split.validate();
    depscreen::HyperbandConfig hb = c.hyperband;
    hb.patience = c.patience;
    const auto train_set = depscreen::build_segment_set(corpus, split.train_ids, true);
    const auto val_set = depscreen::build_segment_set(corpus, split.validation_ids, false);
    const auto result = depscreen::hyperband_search(
        c.search_space, train_set, val_set, hb, c.seed, corpus.t_frames(), corpus.n_mfcc(),
        [](const depscreen::TrialRecord& t) {
          log_line("iteration " + std::to_string(t.iteration) + " bracket " + std::to_string(t.bracket) + " rung " +
                   std::to_string(t.rung) + " trial " + std::to_string(t.trial) + ": " +
                   std::to_string(t.epochs_run) + "/" + std::to_string(t.epochs_allocated) +
                   " epochs, val loss " + std::to_string(t.val_loss));
        });
    std::filesystem::create_directories(out);
    depscreen::write_file_atomic(out / "best_hyperparams.json", result.best.to_json().dump(2) + "\n");
    depscreen::write_file_atomic(out / "trials.csv", result.trial_log_csv());
    nlohmann::json budget = nlohmann::json::array();
    for (const auto& [key, epochs] : result.epochs_per_bracket()) {
      budget.push_back({{"iteration", key.first}, {"bracket", key.second}, {"epochs", epochs}});
    }
    put_json(out_summary_json, {{"best", result.best.to_json()},
                                {"best_val_loss", result.best_val_loss},
                                {"trials", result.trials.size()},
                                {"epochs_per_bracket", budget},
                                {"budget_bound", (depscreen::hyperband_s_max(hb) + 1) * hb.max_resource}});
  });
}

ds_status ds_losocv(const ds_config* config, const char* features_dir, const char* verdicts_csv, const char* out_dir,
                    char** out_summary_json) {
  return guarded([&] {
    require(config != nullptr, "config must not be null");
    const auto out = path_arg(out_dir, "out_dir");
    const auto report = depscreen::run_losocv(load_eval_corpus(features_dir, verdicts_csv), eval_options(config->config));
    report.write(out);
    put_json(out_summary_json, report.to_json());
  });
}

ds_status ds_eval_split(const ds_config* config, const char* features_dir, const char* verdicts_csv,
                        const char* split_dir, const char* out_dir, char** out_summary_json) {
  return guarded([&] {
    require(config != nullptr, "config must not be null");
    const auto out = path_arg(out_dir, "out_dir");
    const auto split = depscreen::load_split(path_arg(split_dir, "split_dir"));
    const auto report =
        depscreen::run_avec(load_eval_corpus(features_dir, verdicts_csv), split, eval_options(config->config));
    report.write(out);
    put_json(out_summary_json, report.to_json());
  });
}

ds_status ds_metrics(long tp, long fp, long fn, long tn, const char* reported_json, char** out_json) {
  return guarded([&] {
    require(out_json != nullptr, "out_json must not be null");
    require(tp >= 0 && fp >= 0 && fn >= 0 && tn >= 0, "confusion counts must be non-negative");
    const depscreen::ConfusionMatrix m{tp, fp, fn, tn};
    nlohmann::json j = depscreen::compute_metrics(m).to_json();
    j["matrix"] = {{"tp", tp}, {"fp", fp}, {"fn", fn}, {"tn", tn}};
    nlohmann::json warnings = nlohmann::json::array();
    if (reported_json != nullptr && *reported_json != '\0') {
      nlohmann::json reported;
      try {
        reported = nlohmann::json::parse(reported_json);
      } catch (const nlohmann::json::exception& e) {
        depscreen::fail(ErrorCode::kValidation, std::string("reported figures: ") + e.what());
      }
      for (const auto& w : depscreen::consistency_warnings(m, reported_from_json(reported))) warnings.push_back(w);
    }
    j["warnings"] = warnings;
    put_json(out_json, j);
  });
}

ds_status ds_model_load(const char* checkpoint, ds_model** out) {
  return guarded([&] {
    require(out != nullptr, "out must not be null");
    auto m = std::make_unique<ds_model>();
    const auto path = path_arg(checkpoint, "checkpoint");
    m->model = depscreen::FusionModel::load(path);
    m->path = path.string();
    *out = m.release();
  });
}

ds_status ds_model_info(const ds_model* model, char** out_json) {
  return guarded([&] {
    require(model != nullptr && out_json != nullptr, "model and out_json must not be null");
    put_json(out_json, {{"checkpoint", model->path},
                        {"hyperparams", model->model->hyperparams().to_json()},
                        {"t_frames", model->model->t_frames()},
                        {"parameters", model->model->parameter_count()},
                        {"checksum", model->model->checksum()}});
  });
}

void ds_model_free(ds_model* model) { delete model; }

ds_status ds_process_recording(const ds_config* config, const ds_model* model, const char* source, int interview_id,
                               char** out_json) {
  return guarded([&] {
    require(config != nullptr && model != nullptr && out_json != nullptr, "config, model and out_json are required");
    const auto src = path_arg(source, "source");
    const auto corpus_root = depscreen::resolve_recording_root(src, interview_id);
    const auto ctx = depscreen::make_context(config->config, corpus_root);
    const auto r = depscreen::process_recording(src, interview_id, *model->model, ctx,
                                                "report-" + std::to_string(interview_id));
    put_json(out_json, {{"report", r.report.to_json()},
                        {"decision",
                         {{"diagnosis", depscreen::label_name(r.decision.diagnosis)},
                          {"confidence", r.decision.confidence},
                          {"majority", depscreen::label_name(r.decision.majority)}}},
                        {"text_verdict", depscreen::label_name(r.verdict.diagnosis)},
                        {"segments", r.segments},
                        {"timings",
                         {{"preprocessing", r.timings.preprocessing},
                          {"features", r.timings.features},
                          {"llm", r.timings.llm},
                          {"inference", r.timings.inference},
                          {"reporting", r.timings.reporting},
                          {"total", r.timings.total}}}});
  });
}

ds_status ds_service_start(const ds_config* config, const ds_model* model, const char* host, int port,
                           const char* report_dir, ds_service** out) {
  return guarded([&] {
    require(config != nullptr && model != nullptr && out != nullptr, "config, model and out are required");
    const auto& c = config->config;
    auto ctx = std::make_shared<depscreen::PipelineContext>(depscreen::make_context(c, {}));
    if (ctx->exemplars.size() != 4) {
      depscreen::fail(ErrorCode::kUnbalancedExemplars, "the service needs exemplar_dir with four labeled exemplars");
    }
    const char* secret = std::getenv(depscreen::kWebhookSecretEnv);
    if (secret == nullptr || *secret == '\0') {
      depscreen::fail(ErrorCode::kAuthFailure, std::string(depscreen::kWebhookSecretEnv) + " is not set");
    }
    depscreen::ServiceOptions o;
    o.host = host != nullptr ? host : c.service.host;
    o.port = port >= 0 ? port : c.service.port;
    o.workers = c.service.workers;
    o.queue_capacity = c.service.queue_capacity;
    o.report_dir = report_dir != nullptr ? report_dir : c.service.report_dir;
    o.webhook_secret = secret;
    auto s = std::make_unique<ds_service>();
    s->ctx = ctx;
    s->service = std::make_unique<depscreen::InferenceService>(o, depscreen::recording_processor(model->model, ctx));
    s->service->start();
    log_line("listening on " + o.host + ":" + std::to_string(s->service->port()));
    *out = s.release();
  });
}

int ds_service_port(const ds_service* service) { return service != nullptr ? service->service->port() : -1; }

ds_status ds_service_wait_idle(ds_service* service, int timeout_ms) {
  return guarded([&] {
    require(service != nullptr, "service must not be null");
    if (!service->service->wait_until_idle(std::chrono::milliseconds(timeout_ms))) {
      depscreen::fail(ErrorCode::kValidation, "service still busy after timeout");
    }
  });
}

ds_status ds_service_jobs(const ds_service* service, char** out_json) {
  return guarded([&] {
    require(service != nullptr && out_json != nullptr, "service and out_json must not be null");
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& j : service->service->jobs()) arr.push_back(j.to_json());
    put_json(out_json, arr);
  });
}

void ds_service_free(ds_service* service) {
  if (service == nullptr) return;
  try {
    service->service->stop();
  } catch (...) {
  }
  delete service;
}

ds_status ds_simulate_webhook(const char* base_url, const char* secret, int interview_id, const char* recording_path,
                              int tamper, int* http_status, char** out_body) {
  return guarded([&] {
    require(base_url != nullptr && secret != nullptr && recording_path != nullptr,
            "base_url, secret and recording_path are required");
    const auto r = depscreen::post_recording_completed(base_url, secret, interview_id, recording_path, tamper != 0);
    if (http_status != nullptr) *http_status = r.status;
    if (out_body != nullptr) *out_body = dup_string(r.body);
  });
}

ds_status ds_http_get(const char* base_url, const char* path, int* http_status, char** out_body) {
  return guarded([&] {
    require(base_url != nullptr && path != nullptr, "base_url and path are required");
    const auto r = depscreen::http_get(base_url, path);
    if (http_status != nullptr) *http_status = r.status;
    if (out_body != nullptr) *out_body = dup_string(r.body);
  });
}

}  // extern "C"
