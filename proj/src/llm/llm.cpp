// SPDX-License-Identifier: Apache-2.0
#include "llm/llm.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <ctime>
#include <thread>

#include "common/crypto.hpp"
#include "common/error.hpp"
#include "common/fs.hpp"
#include "corpus/corpus.hpp"
#include "corpus/synth.hpp"

namespace depscreen {
namespace {

Json diagnosis_tool() {
  return {{"type", "function"},
          {"function",
           {{"name", kDiagnosisTool},
            {"description", "Record the diagnosis for the transcript."},
            {"parameters",
             {{"type", "object"},
              {"properties", {{"diagnosis", {{"type", "string"}, {"enum", {"depressed", "not depressed"}}}}}},
              {"required", {"diagnosis"}},
              {"additionalProperties", false}}}}}};
}

Json report_tool() {
  return {{"type", "function"},
          {"function",
           {{"name", kReportTool},
            {"description", "Record the clinical report for the interview."},
            {"parameters",
             {{"type", "object"},
              {"properties", {{"summary", {{"type", "string"}}}, {"justification", {{"type", "string"}}}}},
              {"required", {"summary", "justification"}},
              {"additionalProperties", false}}}}}};
}

Json forced(const char* tool) { return {{"type", "function"}, {"function", {{"name", tool}}}}; }

std::string diagnosis_answer(Label l) { return Json{{"diagnosis", label_name(l)}}.dump(); }

// Arguments object of the first tool call named `tool`, if any.
std::optional<Json> tool_arguments(const std::string& raw, const char* tool) {
  const Json body = Json::parse(raw, nullptr, false);
  if (body.is_discarded() || !body.is_object()) return std::nullopt;
  const auto choices = body.find("choices");
  if (choices == body.end() || !choices->is_array() || choices->empty()) return std::nullopt;
  const Json& message = (*choices)[0].value("message", Json::object());
  const auto calls = message.find("tool_calls");
  if (calls == message.end() || !calls->is_array()) return std::nullopt;
  for (const auto& call : *calls) {
    const Json fn = call.value("function", Json::object());
    if (fn.value("name", "") != tool) continue;
    const Json args_field = fn.value("arguments", Json());
    Json args = args_field.is_string() ? Json::parse(args_field.get<std::string>(), nullptr, false) : args_field;
    if (args.is_discarded() || !args.is_object()) return std::nullopt;
    return args;
  }
  return std::nullopt;
}

struct ReportText {
  std::string summary, justification;
};

std::optional<ReportText> parse_report_response(const std::string& raw) {
  const auto args = tool_arguments(raw, kReportTool);
  if (!args || args->size() != 2) return std::nullopt;
  const auto s = args->find("summary");
  const auto j = args->find("justification");
  if (s == args->end() || j == args->end() || !s->is_string() || !j->is_string()) return std::nullopt;
  ReportText out{s->get<std::string>(), j->get<std::string>()};
  if (trim(out.summary).empty() || trim(out.justification).empty()) return std::nullopt;
  return out;
}

Json tool_call_response(const char* tool, const Json& args) {
  return {{"id", "stub-completion"},
          {"object", "chat.completion"},
          {"choices",
           {{{"index", 0},
             {"finish_reason", "stop"},
             {"message",
              {{"role", "assistant"},
               {"content", nullptr},
               {"tool_calls",
                {{{"id", "call_0"}, {"type", "function"}, {"function", {{"name", tool}, {"arguments", args.dump()}}}}}}}}}}}};
}

std::string last_user_message(const Json& request) {
  const auto& messages = request.at("messages");
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->value("role", "") == "user") return it->value("content", "");
  }
  return {};
}

const char* requested_tool(const Json& request) {
  const std::string name = request.value("tool_choice", Json::object()).value("function", Json::object()).value("name", "");
  return name == kReportTool ? kReportTool : kDiagnosisTool;
}

}  // namespace

Json PromptBundle::request() const {
  Json messages = Json::array();
  messages.push_back({{"role", "system"}, {"content", system_instruction}});
  for (const auto& ex : exemplars) {
    messages.push_back({{"role", "user"}, {"content", ex.dialogue}});
    messages.push_back({{"role", "assistant"}, {"content", diagnosis_answer(ex.label)}});
  }
  messages.push_back({{"role", "user"}, {"content", target_dialogue}});
  return {{"messages", messages},
          {"tools", Json::array({diagnosis_tool()})},
          {"tool_choice", forced(kDiagnosisTool)},
          {"temperature", 0}};
}

std::string PromptBundle::request_hash() const { return sha256_hex(request().dump()); }

PromptBundle build_prompt(const std::string& dialogue, const std::vector<Exemplar>& exemplars, int interview_id) {
  if (trim(dialogue).empty()) fail(ErrorCode::kValidation, "empty dialogue for interview " + std::to_string(interview_id));
  int depressed = 0;
  for (const auto& e : exemplars) depressed += label_bit(e.label);
  if (exemplars.size() != 4 || depressed != 2) {
    fail(ErrorCode::kUnbalancedExemplars, "need 4 exemplars, 2 per class; got " + std::to_string(exemplars.size()) +
                                              " with " + std::to_string(depressed) + " depressed");
  }
  for (const auto& e : exemplars) {
    if (e.interview_id == interview_id && interview_id != 0) {
      fail(ErrorCode::kLeakageDetected, "interview " + std::to_string(interview_id) + " is also an exemplar");
    }
  }
  return PromptBundle{kDiagnosisSystemPrompt, exemplars, dialogue, interview_id};
}

std::vector<Exemplar> load_exemplars(const std::filesystem::path& dir, const AcronymTable& acronyms) {
  std::vector<Exemplar> out;
  for (int id : list_interview_ids(dir)) {
    const Interview iv = load_interview(dir, id);
    out.push_back(Exemplar{id, render_dialogue(normalize_transcript(iv.utterances, acronyms)), *iv.label});
  }
  return out;
}

std::optional<Label> parse_diagnosis_response(const std::string& raw) {
  const auto args = tool_arguments(raw, kDiagnosisTool);
  if (!args || args->size() != 1) return std::nullopt;
  const auto d = args->find("diagnosis");
  if (d == args->end() || !d->is_string()) return std::nullopt;
  if (*d == "depressed") return Label::kDepressed;
  if (*d == "not depressed") return Label::kNotDepressed;
  return std::nullopt;
}

StubBackend::StubBackend() : StubBackend(synthetic_marker_phrases()) {}

StubBackend::StubBackend(std::vector<std::string> markers) : markers_(std::move(markers)) {
  for (auto& m : markers_) m = to_lower(m);
}

std::string StubBackend::complete(const Json& request) {
  ++calls_;
  const std::string text = to_lower(last_user_message(request));
  if (requested_tool(request) == kReportTool) {
    // The report request states the diagnosis on a "Diagnosis:" line.
    std::string diagnosis = "not depressed";
    const auto pos = text.find("diagnosis: ");
    if (pos != std::string::npos) {
      diagnosis = text.substr(pos + 11, text.find('\n', pos) - pos - 11);
    }
    std::size_t patient_turns = 0;
    for (std::size_t p = text.find("patient:"); p != std::string::npos; p = text.find("patient:", p + 1)) ++patient_turns;
    std::vector<std::string> found;
    for (const auto& m : markers_) {
      if (text.find(m) != std::string::npos) found.push_back(m);
    }
    std::string evidence = found.empty() ? "no statements matching depressive symptom markers" : "statements such as";
    for (std::size_t i = 0; i < found.size(); ++i) evidence += (i == 0 ? " \"" : ", \"") + found[i] + "\"";
    const Json args = {{"summary", "Interview with " + std::to_string(patient_turns) +
                                       " patient turns reviewed. Screening result: " + diagnosis + "."},
                       {"justification", "The transcript contains " + evidence + "."}};
    return tool_call_response(kReportTool, args).dump();
  }
  bool depressed = false;
  for (const auto& m : markers_) depressed |= text.find(m) != std::string::npos;
  return tool_call_response(kDiagnosisTool, {{"diagnosis", depressed ? "depressed" : "not depressed"}}).dump();
}

RemoteBackend::RemoteBackend(RemoteBackendConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.base_url.empty() || cfg_.model.empty()) fail(ErrorCode::kInvalidArgument, "remote backend needs base_url and model");
  while (!cfg_.base_url.empty() && cfg_.base_url.back() == '/') cfg_.base_url.pop_back();
}

void RemoteBackend::wait_for_slot() {
  if (cfg_.requests_per_minute <= 0) return;
  const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(60.0 / cfg_.requests_per_minute));
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard<std::mutex> lock(rate_mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + interval;
  }
  std::this_thread::sleep_until(slot);
}

std::string RemoteBackend::complete(const Json& request) {
  // Split "scheme://host[:port]/prefix" into client origin and path prefix.
  const auto scheme_end = cfg_.base_url.find("://");
  const auto path_start = cfg_.base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  const std::string origin = path_start == std::string::npos ? cfg_.base_url : cfg_.base_url.substr(0, path_start);
  const std::string prefix = path_start == std::string::npos ? "" : cfg_.base_url.substr(path_start);

  Json body = request;
  body["model"] = cfg_.model;
  wait_for_slot();

  httplib::Client client(origin);
  const auto timeout = std::chrono::duration<double>(cfg_.timeout_seconds);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  httplib::Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
  const auto res = client.Post(prefix + "/chat/completions", headers, body.dump(), "application/json");
  if (!res) throw TransientBackendError("transport error: " + httplib::to_string(res.error()));
  if (res->status == 401 || res->status == 403) {
    fail(ErrorCode::kAuthFailure, "backend rejected credentials (HTTP " + std::to_string(res->status) + ")");
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransientBackendError("HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) fail(ErrorCode::kBackendUnavailable, "HTTP " + std::to_string(res->status) + ": " + res->body);
  return res->body;
}

Json ClinicalReport::to_json() const {
  return {{"report_id", report_id},
          {"interview_id", interview_id},
          {"diagnosis", label_name(diagnosis)},
          {"confidence", confidence},
          {"summary", summary},
          {"justification", justification},
          {"created_at", created_at}};
}

ClinicalReport ClinicalReport::from_json(const Json& j) {
  ClinicalReport r;
  try {
    r.report_id = j.at("report_id").get<std::string>();
    r.interview_id = j.at("interview_id").get<int>();
    const std::string d = j.at("diagnosis").get<std::string>();
    if (d != "depressed" && d != "not depressed") fail(ErrorCode::kValidation, "unknown diagnosis '" + d + "'");
    r.diagnosis = d == "depressed" ? Label::kDepressed : Label::kNotDepressed;
    r.confidence = j.at("confidence").get<double>();
    r.summary = j.at("summary").get<std::string>();
    r.justification = j.at("justification").get<std::string>();
    r.created_at = j.at("created_at").get<std::string>();
  } catch (const Json::exception& e) {
    fail(ErrorCode::kValidation, std::string("report JSON: ") + e.what());
  }
  return r;
}

std::string utc_timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

LlmClassifier::LlmClassifier(std::shared_ptr<LlmBackend> backend, LlmOptions options)
    : backend_(std::move(backend)), options_(std::move(options)) {
  if (!backend_) fail(ErrorCode::kInvalidArgument, "null LLM backend");
  if (!options_.cache_dir.empty()) std::filesystem::create_directories(options_.cache_dir);
}

std::string LlmClassifier::cache_key(const PromptBundle& bundle) const {
  return sha256_hex(backend_->id() + "\n" + bundle.request().dump());
}

template <typename Accept>
std::string LlmClassifier::call_with_retries(const Json& request, Accept accept, int& malformed_retries) {
  malformed_retries = 0;
  int transient_retries = 0;
  double backoff = options_.backoff_initial_seconds;
  std::string last_error;
  while (true) {
    try {
      std::string raw = backend_->complete(request);
      if (accept(raw)) return raw;
      if (malformed_retries >= options_.max_retries) {
        fail(ErrorCode::kMalformedAfterRetries,
             "backend " + backend_->id() + " returned " + std::to_string(malformed_retries + 1) + " malformed responses");
      }
      ++malformed_retries;
      spdlog::warn("malformed response from {} (retry {}/{})", backend_->id(), malformed_retries, options_.max_retries);
    } catch (const TransientBackendError& e) {
      if (transient_retries >= options_.max_retries) {
        fail(ErrorCode::kBackendUnavailable, backend_->id() + ": " + e.what());
      }
      ++transient_retries;
      spdlog::warn("transient failure from {}: {} (retry {}/{})", backend_->id(), e.what(), transient_retries,
                   options_.max_retries);
    }
    if (backoff > 0) std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
    backoff *= 2.0;
  }
}

LlmVerdict LlmClassifier::classify(const PromptBundle& bundle) {
  const std::string key = cache_key(bundle);
  const auto cache_file = options_.cache_dir.empty() ? std::filesystem::path() : options_.cache_dir / (key + ".json");
  LlmVerdict v;
  v.interview_id = bundle.interview_id;
  v.backend_id = backend_->id();

  if (!cache_file.empty()) {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    if (std::filesystem::exists(cache_file)) {
      const Json entry = Json::parse(read_text_file(cache_file), nullptr, false);
      if (!entry.is_discarded() && entry.value("request_hash", "") == key) {
        const auto parsed = parse_diagnosis_response(entry.value("raw_response", ""));
        if (parsed) {
          v.diagnosis = *parsed;
          v.raw_response = entry.value("raw_response", "");
          v.cached = true;
          return v;
        }
      }
      spdlog::warn("ignoring unreadable cache entry {}", cache_file.string());
    }
  }

  v.raw_response = call_with_retries(
      bundle.request(), [](const std::string& raw) { return parse_diagnosis_response(raw).has_value(); },
      v.malformed_retries);
  v.diagnosis = *parse_diagnosis_response(v.raw_response);

  if (!cache_file.empty()) {
    const Json entry = {{"request_hash", key},
                        {"backend_id", v.backend_id},
                        {"raw_response", v.raw_response},
                        {"diagnosis", label_name(v.diagnosis)}};
    std::lock_guard<std::mutex> lock(cache_mutex_);
    write_file_atomic(cache_file, entry.dump(2));
  }
  return v;
}

ClinicalReport LlmClassifier::generate_report(const std::string& dialogue, const LlmVerdict& verdict, double confidence,
                                              const std::string& report_id) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) fail(ErrorCode::kInvalidArgument, "confidence must lie in [0, 1]");
  std::string user = "Diagnosis: ";
  user += label_name(verdict.diagnosis);
  user += "\nModel confidence: " + std::to_string(confidence) + "\n\nTranscript:\n" + dialogue;
  const Json request = {
      {"messages",
       {{{"role", "system"},
         {"content",
          "You are assisting a psychiatrist. Write a clinical summary of the interview covering its main points, then "
          "explain the evidence in the transcript that supports the stated screening result."}},
        {{"role", "user"}, {"content", user}}}},
      {"tools", Json::array({report_tool()})},
      {"tool_choice", forced(kReportTool)},
      {"temperature", 0}};
  int retries = 0;
  const std::string raw = call_with_retries(
      request, [](const std::string& r) { return parse_report_response(r).has_value(); }, retries);
  const ReportText text = *parse_report_response(raw);

  ClinicalReport report;
  report.report_id = report_id;
  report.interview_id = verdict.interview_id;
  report.diagnosis = verdict.diagnosis;
  report.confidence = confidence;
  report.summary = text.summary;
  report.justification = text.justification;
  report.created_at = utc_timestamp_now();
  return report;
}

}  // namespace depscreen
