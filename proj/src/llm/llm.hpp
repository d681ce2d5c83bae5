// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <json.hpp>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "corpus/types.hpp"
#include "transcript/transcript.hpp"

namespace depscreen {

using Json = nlohmann::json;

inline constexpr const char* kDiagnosisSystemPrompt =
    "Take on the role of an expert in psychiatric diagnosis using the DSM 5. Read the following transcript and "
    "determine if the patient has depression.";
inline constexpr const char* kDiagnosisTool = "record_diagnosis";
inline constexpr const char* kReportTool = "record_report";

struct Exemplar {
  int interview_id = 0;
  std::string dialogue;
  Label label = Label::kNotDepressed;
};

struct PromptBundle {
  std::string system_instruction;
  std::vector<Exemplar> exemplars;
  std::string target_dialogue;
  int interview_id = 0;

  // OpenAI-style chat request without the model field: system prompt,
  // exemplar user/assistant turns, target transcript, and a forced
  // record_diagnosis tool call.
  Json request() const;
  std::string request_hash() const;
};

// Exemplars must be 2 depressed + 2 not depressed (UnbalancedExemplars);
// an empty dialogue is a Validation error.
PromptBundle build_prompt(const std::string& dialogue, const std::vector<Exemplar>& exemplars, int interview_id = 0);

// Exemplar interviews from a corpus-layout directory, normalized and
// rendered like any target transcript.
std::vector<Exemplar> load_exemplars(const std::filesystem::path& dir, const AcronymTable& acronyms);

// Diagnosis from a chat-completion response body; nullopt unless the body
// carries a record_diagnosis tool call whose arguments match the schema.
std::optional<Label> parse_diagnosis_response(const std::string& raw);

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string id() const = 0;
  // Returns the raw response body. Throws Error(AuthFailure) for rejected
  // credentials and TransientBackendError for retryable failures.
  virtual std::string complete(const Json& request) = 0;
};

class TransientBackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Offline backend: "depressed" iff the last user message contains one of
// the marker phrases (case-insensitive). Report requests get templated text.
class StubBackend final : public LlmBackend {
 public:
  StubBackend();
  explicit StubBackend(std::vector<std::string> markers);
  std::string id() const override { return "stub"; }
  std::string complete(const Json& request) override;
  std::size_t calls() const { return calls_.load(); }

 private:
  std::vector<std::string> markers_;
  std::atomic<std::size_t> calls_{0};
};

struct RemoteBackendConfig {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string model;
  std::string api_key;
  double requests_per_minute = 60.0;
  double timeout_seconds = 120.0;
};

// OpenAI-compatible POST {base_url}/chat/completions.
class RemoteBackend final : public LlmBackend {
 public:
  explicit RemoteBackend(RemoteBackendConfig cfg);
  std::string id() const override { return "remote:" + cfg_.model; }
  std::string complete(const Json& request) override;

 private:
  void wait_for_slot();

  RemoteBackendConfig cfg_;
  std::mutex rate_mutex_;
  std::chrono::steady_clock::time_point next_slot_{};
};

struct LlmVerdict {
  int interview_id = 0;
  Label diagnosis = Label::kNotDepressed;
  std::string raw_response;
  std::string backend_id;
  bool cached = false;
  int malformed_retries = 0;
};

struct ClinicalReport {
  std::string report_id;
  int interview_id = 0;
  Label diagnosis = Label::kNotDepressed;
  double confidence = 0.0;
  std::string summary;
  std::string justification;
  std::string created_at;  // ISO 8601 UTC

  Json to_json() const;
  static ClinicalReport from_json(const Json& j);
  bool operator==(const ClinicalReport&) const = default;
};

struct LlmOptions {
  int max_retries = 3;
  double backoff_initial_seconds = 1.0;
  std::filesystem::path cache_dir;  // empty disables the cache
};

// Retries, backoff and the content-addressed verdict cache around a backend.
class LlmClassifier {
 public:
  LlmClassifier(std::shared_ptr<LlmBackend> backend, LlmOptions options = {});

  LlmVerdict classify(const PromptBundle& bundle);
  ClinicalReport generate_report(const std::string& dialogue, const LlmVerdict& verdict, double confidence,
                                 const std::string& report_id = {});

  const LlmBackend& backend() const { return *backend_; }
  std::string cache_key(const PromptBundle& bundle) const;

 private:
  // Calls the backend until accept() returns true; handles retries.
  template <typename Accept>
  std::string call_with_retries(const Json& request, Accept accept, int& malformed_retries);

  std::shared_ptr<LlmBackend> backend_;
  LlmOptions options_;
  std::mutex cache_mutex_;
};

std::string utc_timestamp_now();

}  // namespace depscreen
