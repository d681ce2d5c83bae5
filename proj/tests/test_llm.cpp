// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>
#include <httplib.h>

#include <deque>
#include <fstream>
#include <thread>

#include "common/error.hpp"
#include "corpus/synth.hpp"
#include "llm/llm.hpp"
#include "support.hpp"

using namespace depscreen;
using depscreen::testing::code_of;
using depscreen::testing::TempDir;

namespace {

std::vector<Exemplar> exemplars() {
  return {{2000, "Therapist: How are you?\nPatient: I feel hopeless.", Label::kDepressed},
          {2001, "Therapist: How are you?\nPatient: I can't sleep.", Label::kDepressed},
          {2002, "Therapist: How are you?\nPatient: Pretty good.", Label::kNotDepressed},
          {2003, "Therapist: How are you?\nPatient: I love my job.", Label::kNotDepressed}};
}

std::string tool_response(const std::string& args_json) {
  return Json{{"choices",
               {{{"message",
                  {{"role", "assistant"},
                   {"tool_calls",
                    {{{"type", "function"}, {"function", {{"name", "record_diagnosis"}, {"arguments", args_json}}}}}}}}}}}}
      .dump();
}

// Replays a fixed list of responses; "!transient" throws a retryable error.
class ScriptedBackend final : public LlmBackend {
 public:
  explicit ScriptedBackend(std::deque<std::string> script) : script_(std::move(script)) {}
  std::string id() const override { return "scripted"; }
  std::string complete(const Json&) override {
    ++calls;
    if (script_.empty()) return "exhausted";
    std::string next = script_.front();
    script_.pop_front();
    if (next == "!transient") throw TransientBackendError("simulated outage");
    return next;
  }
  int calls = 0;

 private:
  std::deque<std::string> script_;
};

LlmOptions fast_options(const std::filesystem::path& cache = {}) {
  LlmOptions o;
  o.backoff_initial_seconds = 0.0;
  o.cache_dir = cache;
  return o;
}

}  // namespace

TEST_CASE("prompt bundle carries the fixed system instruction and exemplar turns") {
  const auto bundle = build_prompt("Therapist: Hi.\nPatient: Hello.", exemplars(), 1000);
  CHECK(bundle.system_instruction ==
        "Take on the role of an expert in psychiatric diagnosis using the DSM 5. Read the following transcript and "
        "determine if the patient has depression.");
  const Json req = bundle.request();
  const auto& msgs = req.at("messages");
  REQUIRE(msgs.size() == 1 + 2 * 4 + 1);
  CHECK(msgs[0].at("role") == "system");
  CHECK(msgs[1].at("role") == "user");
  CHECK(msgs[2].at("role") == "assistant");
  CHECK(Json::parse(msgs[2].at("content").get<std::string>()) == Json{{"diagnosis", "depressed"}});
  CHECK(Json::parse(msgs[6].at("content").get<std::string>()) == Json{{"diagnosis", "not depressed"}});
  CHECK(msgs.back().at("content") == "Therapist: Hi.\nPatient: Hello.");
  CHECK(req.at("tool_choice").at("function").at("name") == "record_diagnosis");
  const auto& schema = req.at("tools")[0].at("function").at("parameters");
  CHECK(schema.at("properties").at("diagnosis").at("enum") == Json{"depressed", "not depressed"});
  CHECK(req.at("temperature") == 0);
}

TEST_CASE("prompt validation") {
  CHECK(code_of([] { build_prompt("", exemplars()); }) == ErrorCode::kValidation);
  CHECK(code_of([] { build_prompt("   \n", exemplars()); }) == ErrorCode::kValidation);
  auto unbalanced = exemplars();
  unbalanced[2].label = Label::kDepressed;
  CHECK(code_of([&] { build_prompt("x", unbalanced); }) == ErrorCode::kUnbalancedExemplars);
  CHECK(code_of([] { build_prompt("x", {}); }) == ErrorCode::kUnbalancedExemplars);
  CHECK(code_of([] { build_prompt("x", exemplars(), 2001); }) == ErrorCode::kLeakageDetected);
}

TEST_CASE("request hashing is stable and content addressed") {
  const auto a = build_prompt("Patient: fine.", exemplars(), 1);
  const auto b = build_prompt("Patient: fine.", exemplars(), 1);
  const auto c = build_prompt("Patient: fine!", exemplars(), 1);
  CHECK(a.request_hash() == b.request_hash());
  CHECK(a.request_hash() != c.request_hash());
  LlmClassifier clf(std::make_shared<StubBackend>(), fast_options());
  CHECK(clf.cache_key(a) == clf.cache_key(b));
  CHECK(clf.cache_key(a) != clf.cache_key(c));
}

TEST_CASE("stub backend follows the marker rule on synthetic transcripts") {
  auto stub = std::make_shared<StubBackend>();
  LlmClassifier clf(stub, fast_options());
  for (const auto& iv : synth_corpus(6, 0.5, 3)) {
    std::string dialogue;
    for (const auto& u : iv.utterances) dialogue += u.text + "\n";
    const auto v = clf.classify(build_prompt(dialogue, exemplars(), iv.id));
    CHECK(v.diagnosis == *iv.label);
    CHECK(v.backend_id == "stub");
    CHECK_FALSE(v.cached);
  }
}

TEST_CASE("cache hit skips the backend") {
  TempDir dir;
  auto stub = std::make_shared<StubBackend>();
  LlmClassifier clf(stub, fast_options(dir / "cache"));
  const auto bundle = build_prompt("Patient: I feel worthless.", exemplars(), 5);
  const auto first = clf.classify(bundle);
  CHECK_FALSE(first.cached);
  CHECK(stub->calls() == 1);
  const auto second = clf.classify(bundle);
  CHECK(second.cached);
  CHECK(stub->calls() == 1);
  CHECK(second.diagnosis == Label::kDepressed);
  CHECK(second.raw_response == first.raw_response);

  const Json entry = Json::parse(std::ifstream(dir / "cache" / (clf.cache_key(bundle) + ".json")));
  CHECK(entry.at("request_hash") == clf.cache_key(bundle));
  CHECK(entry.at("diagnosis") == "depressed");
  CHECK(entry.contains("raw_response"));
}

TEST_CASE("free-text answers exhaust the malformed-response retries") {
  auto backend = std::make_shared<ScriptedBackend>(std::deque<std::string>(4, "The patient seems sad"));
  LlmClassifier clf(backend, fast_options());
  CHECK(code_of([&] { clf.classify(build_prompt("Patient: hi.", exemplars())); }) == ErrorCode::kMalformedAfterRetries);
  CHECK(backend->calls == 4);
}

TEST_CASE("a conformant answer after malformed ones is accepted and counted") {
  std::deque<std::string> script = {"nope", tool_response(R"({"diagnosis":"sad"})"),
                                    tool_response(R"({"diagnosis":"depressed","extra":1})"),
                                    tool_response(R"({"diagnosis":"not depressed"})")};
  auto backend = std::make_shared<ScriptedBackend>(script);
  LlmClassifier clf(backend, fast_options());
  const auto v = clf.classify(build_prompt("Patient: hi.", exemplars()));
  CHECK(v.diagnosis == Label::kNotDepressed);
  CHECK(v.malformed_retries == 3);
}

TEST_CASE("transient failures retry then surface as BackendUnavailable") {
  auto ok = std::make_shared<ScriptedBackend>(
      std::deque<std::string>{"!transient", "!transient", tool_response(R"({"diagnosis":"depressed"})")});
  LlmClassifier clf(ok, fast_options());
  CHECK(clf.classify(build_prompt("Patient: hi.", exemplars())).diagnosis == Label::kDepressed);

  auto down = std::make_shared<ScriptedBackend>(std::deque<std::string>(4, "!transient"));
  LlmClassifier clf2(down, fast_options());
  CHECK(code_of([&] { clf2.classify(build_prompt("Patient: hi.", exemplars())); }) == ErrorCode::kBackendUnavailable);
  CHECK(down->calls == 4);
}

TEST_CASE("stub clinical report") {
  LlmClassifier clf(std::make_shared<StubBackend>(), fast_options());
  const std::string dialogue = "Therapist: How are you?\nPatient: Honestly I feel hopeless most days.";
  const auto v = clf.classify(build_prompt(dialogue, exemplars(), 1003));
  const auto report = clf.generate_report(dialogue, v, 0.97, "r-1");
  CHECK(report.confidence == 0.97);
  CHECK(report.interview_id == 1003);
  CHECK(report.diagnosis == Label::kDepressed);
  CHECK(report.summary.find("depressed") != std::string::npos);
  CHECK(!report.justification.empty());
  CHECK(!report.created_at.empty());
  CHECK(ClinicalReport::from_json(Json::parse(report.to_json().dump())) == report);
  const Json wire = report.to_json();
  for (const char* f : {"report_id", "interview_id", "diagnosis", "confidence", "summary", "justification", "created_at"}) {
    CHECK(wire.contains(f));
  }
  CHECK(code_of([&] { clf.generate_report(dialogue, v, 1.5); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("remote backend speaks the chat-completions protocol") {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::atomic<int> fail_first{0};
  Json last_request;
  std::string last_auth;
  std::mutex m;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    {
      std::lock_guard<std::mutex> lock(m);
      last_request = Json::parse(req.body);
      last_auth = req.get_header_value("Authorization");
    }
    if (last_auth != "Bearer good-key") {
      res.status = 401;
      return;
    }
    if (fail_first > 0) {
      --fail_first;
      res.status = 503;
      return;
    }
    res.set_content(tool_response(R"({"diagnosis":"depressed"})"), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  RemoteBackendConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  cfg.model = "test-model";
  cfg.api_key = "good-key";
  cfg.requests_per_minute = 6000;
  auto remote = std::make_shared<RemoteBackend>(cfg);
  CHECK(remote->id() == "remote:test-model");
  LlmClassifier clf(remote, fast_options());
  const auto v = clf.classify(build_prompt("Patient: I can't sleep.", exemplars(), 7));
  CHECK(v.diagnosis == Label::kDepressed);
  {
    std::lock_guard<std::mutex> lock(m);
    CHECK(last_request.at("model") == "test-model");
    CHECK(last_request.at("tool_choice").at("function").at("name") == "record_diagnosis");
    CHECK(last_request.at("messages")[0].at("content") == kDiagnosisSystemPrompt);
  }

  fail_first = 2;
  const int before = hits;
  CHECK(clf.classify(build_prompt("Patient: ok.", exemplars(), 8)).diagnosis == Label::kDepressed);
  CHECK(hits - before == 3);

  fail_first = 10;
  CHECK(code_of([&] { clf.classify(build_prompt("Patient: ok.", exemplars(), 8)); }) == ErrorCode::kBackendUnavailable);
  fail_first = 0;

  cfg.api_key = "bad-key";
  LlmClassifier bad(std::make_shared<RemoteBackend>(cfg), fast_options());
  const int before_auth = hits;
  CHECK(code_of([&] { bad.classify(build_prompt("Patient: ok.", exemplars(), 9)); }) == ErrorCode::kAuthFailure);
  CHECK(hits - before_auth == 1);

  cfg.base_url = "http://127.0.0.1:1/v1";
  cfg.api_key = "good-key";
  LlmClassifier unreachable(std::make_shared<RemoteBackend>(cfg), fast_options());
  CHECK(code_of([&] { unreachable.classify(build_prompt("Patient: ok.", exemplars(), 9)); }) ==
        ErrorCode::kBackendUnavailable);

  server.stop();
  th.join();
}
