// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "app/report_store.hpp"

namespace httplib {
class Server;
}

namespace depscreen {

enum class JobState { kQueued, kPreprocessing, kFeatures, kLlm, kInference, kReporting, kDone, kFailed };
const char* job_state_name(JobState s);

struct InferenceJob {
  std::string job_id;
  int interview_id = 0;
  std::string recording_path;
  JobState state = JobState::kQueued;
  std::string created_at;
  std::string updated_at;
  std::vector<std::string> history;  // state names in the order entered
  std::optional<std::string> error;
  std::optional<std::string> failed_stage;
  std::optional<std::string> report_id;
  long completion_seq = -1;  // order in which jobs reached a terminal state

  bool terminal() const { return state == JobState::kDone || state == JobState::kFailed; }
  nlohmann::json to_json() const;
};

// Moves a job forward through the pipeline states. Called by the processor;
// going backwards or skipping to a terminal state throws Validation.
using StageAdvance = std::function<void(JobState)>;
using JobProcessor =
    std::function<ClinicalReport(const InferenceJob& job, const std::string& report_id, const StageAdvance& advance)>;

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  int workers = 2;
  std::size_t queue_capacity = 100;
  std::filesystem::path report_dir;
  std::string webhook_secret;
};

// Webhook intake, bounded job queue, worker pool and report endpoints.
class InferenceService {
 public:
  InferenceService(ServiceOptions options, JobProcessor processor);
  ~InferenceService();
  InferenceService(const InferenceService&) = delete;
  InferenceService& operator=(const InferenceService&) = delete;

  void start_workers();
  // Workers plus the HTTP listener.
  void start();
  void stop();
  int port() const { return port_; }

  // Checks the X-Signature value (hex HMAC-SHA256 of the body, optionally
  // prefixed "sha256="), parses {interview_id, recording_path} and enqueues.
  // Throws InvalidSignature, MalformedPayload or QueueFull.
  std::string handle_webhook(const std::string& body, const std::string& signature);

  std::optional<InferenceJob> job(const std::string& job_id) const;
  std::vector<InferenceJob> jobs() const;
  std::size_t queue_length() const;
  // True once the queue is empty and no job is running.
  bool wait_until_idle(std::chrono::milliseconds timeout);

  ReportStore& reports() { return store_; }

 private:
  void worker_loop();
  void run_job(const std::string& job_id);
  void advance(const std::string& job_id, JobState next);
  void finish(const std::string& job_id, JobState terminal, const std::optional<std::string>& error,
              const std::optional<std::string>& report_id);

  ServiceOptions options_;
  JobProcessor processor_;
  ReportStore store_;

  mutable std::mutex mutex_;
  std::condition_variable work_cv_;
  std::condition_variable idle_cv_;
  std::deque<std::string> queue_;
  std::map<std::string, InferenceJob> jobs_;
  std::size_t running_ = 0;
  long completed_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> workers_;

  std::unique_ptr<httplib::Server> http_;
  std::thread listener_;
  int port_ = 0;
};

}  // namespace depscreen
