// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <chrono>
#include <fstream>
#include <thread>

#include "app/config.hpp"
#include "app/deployment.hpp"
#include "app/pipeline.hpp"
#include "app/report_store.hpp"
#include "app/service.hpp"
#include "app/simulator.hpp"
#include "common/fs.hpp"
#include "corpus/synth.hpp"
#include "fixtures.hpp"
#include "support.hpp"

using namespace depscreen;
using namespace std::chrono_literals;
using depscreen::testing::code_of;
using depscreen::testing::TempDir;

namespace {

ClinicalReport make_report(const std::string& id, int interview) {
  ClinicalReport r;
  r.report_id = id;
  r.interview_id = interview;
  r.diagnosis = Label::kDepressed;
  r.confidence = 0.75;
  r.summary = "summary " + id;
  r.justification = "justification";
  r.created_at = "2026-01-01T00:00:00Z";
  return r;
}

std::string payload(int id, const std::string& path) {
  return nlohmann::json{{"event", "recording.completed"}, {"interview_id", id}, {"recording_path", path}}.dump();
}

ServiceOptions service_options(const std::filesystem::path& dir, std::size_t capacity = 100, int workers = 2) {
  ServiceOptions o;
  o.workers = workers;
  o.queue_capacity = capacity;
  o.report_dir = dir;
  o.webhook_secret = "s3cret";
  return o;
}

// Processor that walks every stage and returns a canned report.
JobProcessor canned_processor(std::chrono::milliseconds delay = 0ms) {
  return [delay](const InferenceJob& job, const std::string& report_id, const StageAdvance& advance) {
    for (JobState s : {JobState::kPreprocessing, JobState::kFeatures, JobState::kLlm, JobState::kInference,
                       JobState::kReporting}) {
      advance(s);
    }
    std::this_thread::sleep_for(delay);
    return make_report(report_id, job.interview_id);
  };
}

// Synthetic corpus on disk plus a desk-sized model trained on its features
// with stub verdicts. The separable fixture is the training corpus itself:
// the model fits it perfectly, so running its raw recordings through the
// deployment pipeline must reproduce the ground truth.
struct Deployment {
  TempDir root{"app"};
  std::vector<Interview> fixture;
  std::shared_ptr<const PipelineContext> ctx;
  std::shared_ptr<FusionModel> model;
};

const Deployment& deployment() {
  static const std::unique_ptr<Deployment> d = [] {
    auto out = std::make_unique<Deployment>();
    std::vector<Interview> train;
    for (int i = 0; i < 10; ++i) train.push_back(synth_interview(1000 + i, i % 2 == 1, 21));
    out->fixture = {train[0], train[1]};
    write_corpus(out->root.path(), train, synth_exemplars(21));

    AppConfig cfg;
    cfg.seed = 4;
    auto ctx = std::make_shared<PipelineContext>(make_context(cfg, out->root.path()));
    std::vector<PreparedInterview> prepared;
    for (const auto& iv : train) prepared.push_back(prepare_interview(iv, *ctx));
    const auto verdicts = classify_interviews(prepared, *ctx);
    const EvalCorpus corpus =
        make_eval_corpus(extract_corpus_features(prepared, cfg.features, cfg.seed), verdict_bits(verdicts));
    out->model = train_full_model(corpus, desk_hyperparams(), 4, 4);
    out->ctx = ctx;
    return out;
  }();
  return *d;
}

}  // namespace

TEST_CASE("configuration round trips through JSON and keeps defaults for absent keys") {
  AppConfig c;
  c.seed = 77;
  c.hyperparams = desk_hyperparams();
  c.llm.backend = "remote";
  c.service.port = 9191;
  const AppConfig back = AppConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.hyperparams == desk_hyperparams());

  TempDir dir;
  write_file_atomic(dir / "c.json", R"({"seed": 5, "hyperparams": "desk", "max_epochs": 7})");
  const AppConfig partial = AppConfig::load(dir / "c.json");
  CHECK(partial.seed == 5);
  CHECK(partial.max_epochs == 7);
  CHECK(partial.hyperparams == desk_hyperparams());
  CHECK(partial.patience == 3);
  CHECK(partial.hyperband.max_resource == 27);
  write_file_atomic(dir / "bad.json", R"({"llm": {"backend": "psychic"}})");
  CHECK(code_of([&] { AppConfig::load(dir / "bad.json"); }) == ErrorCode::kValidation);
  write_file_atomic(dir / "broken.json", "{");
  CHECK(code_of([&] { AppConfig::load(dir / "broken.json"); }) == ErrorCode::kValidation);
}

TEST_CASE("remote backend needs credentials from the environment") {
  LlmSettings s;
  s.backend = "remote";
  ::unsetenv(kLlmApiKeyEnv);
  CHECK(code_of([&] { make_backend(s); }) == ErrorCode::kAuthFailure);
  CHECK(make_backend(LlmSettings{})->id() == "stub");
}

TEST_CASE("report store lists newest first and survives a restart") {
  TempDir dir;
  {
    ReportStore store(dir.path());
    store.put(make_report("report-a", 1));
    store.put(make_report("report-b", 2));
    store.put(make_report("report-c", 3));
    const auto list = store.list();
    REQUIRE(list.size() == 3);
    CHECK(list[0].report_id == "report-c");
    CHECK(list[2].report_id == "report-a");
    CHECK(store.get("report-b") == make_report("report-b", 2));
    CHECK(code_of([&] { store.get("report-zzz"); }) == ErrorCode::kNotFound);
    CHECK(code_of([&] { store.get("../etc/passwd"); }) == ErrorCode::kNotFound);
  }
  // A torn trailing index line is ignored.
  {
    std::ofstream idx(dir / "index.log", std::ios::app);
    idx << "17\trepo";
  }
  ReportStore reopened(dir.path());
  CHECK(reopened.size() == 3);
  CHECK(reopened.list()[0].report_id == "report-c");
  CHECK(reopened.get("report-a").summary == "summary report-a");
  CHECK_FALSE(ReportStore::valid_id("../x"));
  CHECK(ReportStore::valid_id("report-0123abcd"));
}

TEST_CASE("webhooks need a valid signature and payload") {
  TempDir dir;
  InferenceService svc(service_options(dir.path()), canned_processor());
  const std::string body = payload(1000, "/data/1000_P");
  const std::string id = svc.handle_webhook(body, webhook_signature("s3cret", body));
  REQUIRE(svc.job(id).has_value());
  CHECK(svc.job(id)->state == JobState::kQueued);
  CHECK(svc.queue_length() == 1);
  // The bare hex digest is accepted as well.
  CHECK_NOTHROW(svc.handle_webhook(body, webhook_signature("s3cret", body).substr(7)));
  CHECK(svc.queue_length() == 2);

  std::string tampered = body;
  tampered.replace(tampered.find("1000"), 4, "1001");
  CHECK(code_of([&] { svc.handle_webhook(tampered, webhook_signature("s3cret", body)); }) ==
        ErrorCode::kInvalidSignature);
  CHECK(code_of([&] { svc.handle_webhook(body, webhook_signature("wrong", body)); }) == ErrorCode::kInvalidSignature);
  CHECK(code_of([&] { svc.handle_webhook(body, ""); }) == ErrorCode::kInvalidSignature);
  CHECK(svc.queue_length() == 2);

  for (const std::string& bad : {std::string("not json"), std::string(R"({"interview_id": "x", "recording_path": "p"})"),
                                std::string(R"({"interview_id": 3})")}) {
    CHECK(code_of([&] { svc.handle_webhook(bad, webhook_signature("s3cret", bad)); }) ==
          ErrorCode::kMalformedPayload);
  }
  CHECK(svc.queue_length() == 2);
}

TEST_CASE("a bounded queue rejects overflow without disturbing accepted jobs") {
  TempDir dir;
  InferenceService svc(service_options(dir.path(), 100), canned_processor());
  std::vector<std::string> accepted;
  int rejected = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::string body = payload(i, "/rec/" + std::to_string(i));
    try {
      accepted.push_back(svc.handle_webhook(body, webhook_signature("s3cret", body)));
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kQueueFull);
      ++rejected;
    }
  }
  CHECK(accepted.size() == 100);
  CHECK(rejected == 900);
  for (std::size_t i = 0; i < accepted.size(); ++i) {
    CHECK(svc.job(accepted[i])->interview_id == static_cast<int>(i));
    CHECK(svc.job(accepted[i])->state == JobState::kQueued);
  }
  svc.start_workers();
  REQUIRE(svc.wait_until_idle(30s));
  for (const auto& id : accepted) CHECK(svc.job(id)->state == JobState::kDone);
  CHECK(svc.reports().size() == 100);
  svc.stop();
}

TEST_CASE("reports are listed in completion order, not submission order") {
  TempDir dir;
  // Interview 1 takes much longer than interview 2.
  JobProcessor slow_first = [](const InferenceJob& job, const std::string& report_id, const StageAdvance& advance) {
    advance(JobState::kPreprocessing);
    std::this_thread::sleep_for(job.interview_id == 1 ? 400ms : 20ms);
    advance(JobState::kReporting);
    return make_report(report_id, job.interview_id);
  };
  InferenceService svc(service_options(dir.path(), 10, 2), slow_first);
  svc.start_workers();
  const std::string b1 = payload(1, "a"), b2 = payload(2, "b");
  const std::string first = svc.handle_webhook(b1, webhook_signature("s3cret", b1));
  std::this_thread::sleep_for(20ms);
  const std::string second = svc.handle_webhook(b2, webhook_signature("s3cret", b2));
  REQUIRE(svc.wait_until_idle(10s));
  const auto j1 = *svc.job(first), j2 = *svc.job(second);
  CHECK(j2.completion_seq < j1.completion_seq);
  const auto list = svc.reports().list();
  REQUIRE(list.size() == 2);
  CHECK(list[0].report_id == *j1.report_id);  // newest completion first
  CHECK(list[1].report_id == *j2.report_id);
  svc.stop();
}

TEST_CASE("every job reaches a terminal state even when processing fails") {
  TempDir dir;
  JobProcessor flaky = [](const InferenceJob& job, const std::string& report_id, const StageAdvance& advance) {
    advance(JobState::kPreprocessing);
    advance(JobState::kFeatures);
    if (job.interview_id % 3 == 0) throw Error(ErrorCode::kTooShort, "induced");
    if (job.interview_id % 3 == 1) advance(JobState::kQueued);  // illegal backwards move
    advance(JobState::kReporting);
    return make_report(report_id, job.interview_id);
  };
  InferenceService svc(service_options(dir.path(), 50, 3), flaky);
  svc.start_workers();
  std::vector<std::string> ids;
  for (int i = 0; i < 30; ++i) {
    const std::string body = payload(i, "x");
    ids.push_back(svc.handle_webhook(body, webhook_signature("s3cret", body)));
  }
  REQUIRE(svc.wait_until_idle(30s));
  int done = 0, failed = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const InferenceJob j = *svc.job(ids[i]);
    CHECK(j.terminal());
    if (j.state == JobState::kDone) {
      ++done;
      CHECK(i % 3 == 2);
      CHECK(j.history.back() == "done");
    } else {
      ++failed;
      CHECK(j.error.has_value());
      CHECK(j.failed_stage == std::optional<std::string>("features"));
      CHECK_FALSE(j.report_id.has_value());
    }
  }
  CHECK(done == 10);
  CHECK(failed == 20);
  CHECK(svc.reports().size() == 10);
  svc.stop();
}

TEST_CASE("recordings are diagnosed end to end and deterministically") {
  const Deployment& d = deployment();
  for (const Interview& iv : d.fixture) {
    const RecordingResult r = process_recording(d.root.path(), iv.id, *d.model, *d.ctx, "report-x");
    CHECK(r.report.diagnosis == *iv.label);
    CHECK(r.decision.diagnosis == *iv.label);
    CHECK(r.report.confidence == doctest::Approx(r.decision.confidence));
    CHECK(r.report.confidence >= 0.0);
    CHECK(r.report.confidence <= 1.0);
    CHECK_FALSE(r.report.summary.empty());
    CHECK(r.segments >= 2);
    CHECK(std::isfinite(r.timings.total));
    RecordingResult again = process_recording(d.root.path() / (std::to_string(iv.id) + "_P"), iv.id, *d.model,
                                              *d.ctx, "report-x");
    again.report.created_at = r.report.created_at;
    CHECK(again.report == r.report);
  }
}

TEST_CASE("an unreadable recording fails at preprocessing") {
  const Deployment& d = deployment();
  try {
    process_recording("/nonexistent/recordings", 1000, *d.model, *d.ctx, "report-y");
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == Stage::kPreprocessing);
    CHECK(e.code() == ErrorCode::kMissingFile);
  }
}

TEST_CASE("the HTTP service runs signed webhooks to reports and keeps them across restarts") {
  const Deployment& d = deployment();
  TempDir reports;
  std::string report_id;
  {
    InferenceService svc(service_options(reports.path()), recording_processor(d.model, d.ctx));
    svc.start();
    const std::string base = "http://127.0.0.1:" + std::to_string(svc.port());
    CHECK(http_get(base, "/health").status == 200);

    const HttpResult bad = post_recording_completed(base, "s3cret", 1001, d.root.path().string(), true);
    CHECK(bad.status == 401);
    CHECK(svc.jobs().empty());
    CHECK(post_recording_completed(base, "other", 1001, d.root.path().string()).status == 401);

    const HttpResult ok = post_recording_completed(base, "s3cret", 1001, d.root.path().string());
    REQUIRE(ok.status == 202);
    const std::string job_id = ok.json()["job_id"];
    const HttpResult missing = post_recording_completed(base, "s3cret", 4242, "/nonexistent");
    REQUIRE(missing.status == 202);
    REQUIRE(svc.wait_until_idle(60s));

    const nlohmann::json job = http_get(base, "/jobs/" + job_id).json();
    CHECK(job["state"] == "done");
    CHECK(job["history"] == nlohmann::json::array({"queued", "preprocessing", "features", "llm", "inference",
                                                   "reporting", "done"}));
    report_id = job["report_id"];
    const nlohmann::json failed = http_get(base, "/jobs/" + std::string(missing.json()["job_id"])).json();
    CHECK(failed["state"] == "failed");
    CHECK(failed["failed_stage"] == "preprocessing");

    const nlohmann::json list = http_get(base, "/reports").json();
    REQUIRE(list.size() == 1);
    CHECK(list[0]["report_id"] == report_id);
    CHECK(http_get(base, "/reports?interview_id=1001").json().size() == 1);
    CHECK(http_get(base, "/reports?interview_id=1000").json().empty());
    const nlohmann::json report = http_get(base, "/reports/" + report_id).json();
    CHECK(report["diagnosis"] == "depressed");
    CHECK(report.contains("summary"));
    CHECK(report.contains("justification"));
    CHECK(report.contains("confidence"));
    CHECK(http_get(base, "/reports/report-nothere").status == 404);
    CHECK(http_get(base, "/jobs/job-nothere").status == 404);
    svc.stop();
  }
  InferenceService restarted(service_options(reports.path()), recording_processor(d.model, d.ctx));
  restarted.start();
  const std::string base = "http://127.0.0.1:" + std::to_string(restarted.port());
  const nlohmann::json list = http_get(base, "/reports").json();
  REQUIRE(list.size() == 1);
  CHECK(list[0]["report_id"] == report_id);
  restarted.stop();
}
