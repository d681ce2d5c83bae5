// SPDX-License-Identifier: Apache-2.0
#include "app/service.hpp"

#include <httplib.h>

#include <cstdio>
#include <random>

#include "common/crypto.hpp"
#include "common/error.hpp"

namespace depscreen {
namespace {

std::string random_hex() {
  static std::mutex m;
  static std::random_device rd;
  std::lock_guard lock(m);
  const std::uint64_t v = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidSignature: return 401;
    case ErrorCode::kMalformedPayload: return 400;
    case ErrorCode::kQueueFull: return 503;
    case ErrorCode::kNotFound: return 404;
    default: return 500;
  }
}

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  send_json(res, http_status(e.code()), {{"error", std::string(error_code_name(e.code()))}, {"message", e.what()}});
}

}  // namespace

const char* job_state_name(JobState s) {
  switch (s) {
    case JobState::kQueued: return "queued";
    case JobState::kPreprocessing: return "preprocessing";
    case JobState::kFeatures: return "features";
    case JobState::kLlm: return "llm";
    case JobState::kInference: return "inference";
    case JobState::kReporting: return "reporting";
    case JobState::kDone: return "done";
    case JobState::kFailed: return "failed";
  }
  return "unknown";
}

nlohmann::json InferenceJob::to_json() const {
  nlohmann::json j{{"job_id", job_id},         {"interview_id", interview_id}, {"recording_path", recording_path},
                   {"state", job_state_name(state)}, {"created_at", created_at}, {"updated_at", updated_at},
                   {"history", history}};
  j["error"] = error ? nlohmann::json(*error) : nlohmann::json(nullptr);
  j["failed_stage"] = failed_stage ? nlohmann::json(*failed_stage) : nlohmann::json(nullptr);
  j["report_id"] = report_id ? nlohmann::json(*report_id) : nlohmann::json(nullptr);
  if (completion_seq >= 0) j["completion_seq"] = completion_seq;
  return j;
}

InferenceService::InferenceService(ServiceOptions options, JobProcessor processor)
    : options_(std::move(options)), processor_(std::move(processor)), store_(options_.report_dir) {
  if (options_.webhook_secret.empty()) fail(ErrorCode::kValidation, "webhook secret must not be empty");
  if (options_.workers < 1 || options_.queue_capacity < 1) {
    fail(ErrorCode::kValidation, "workers and queue capacity must be positive");
  }
}

InferenceService::~InferenceService() { stop(); }

void InferenceService::start_workers() {
  std::lock_guard lock(mutex_);
  if (!workers_.empty()) return;
  stopping_ = false;
  for (int i = 0; i < options_.workers; ++i) workers_.emplace_back([this] { worker_loop(); });
}

void InferenceService::start() {
  start_workers();
  http_ = std::make_unique<httplib::Server>();
  auto& svr = *http_;
  svr.Post("/webhooks/recording-completed", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      const std::string id = handle_webhook(req.body, req.get_header_value("X-Signature"));
      send_json(res, 202, {{"job_id", id}, {"state", "queued"}});
    } catch (const Error& e) {
      send_error(res, e);
    }
  });
  // Optional filter: ?interview_id=N.
  svr.Get("/reports", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      std::optional<int> only;
      if (req.has_param("interview_id")) {
        try {
          only = std::stoi(req.get_param_value("interview_id"));
        } catch (const std::exception&) {
          fail(ErrorCode::kMalformedPayload, "interview_id must be an integer");
        }
      }
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& r : store_.list()) {
        if (!only || r.interview_id == *only) arr.push_back(r.to_json());
      }
      send_json(res, 200, arr);
    } catch (const Error& e) {
      send_error(res, e);
    }
  });
  svr.Get(R"(/reports/([A-Za-z0-9_\-]+))", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      send_json(res, 200, store_.get(req.matches[1]).to_json());
    } catch (const Error& e) {
      send_error(res, e);
    }
  });
  svr.Get(R"(/jobs/([A-Za-z0-9_\-]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto j = job(req.matches[1]);
    if (!j) {
      send_error(res, Error(ErrorCode::kNotFound, "no job '" + std::string(req.matches[1]) + "'"));
      return;
    }
    send_json(res, 200, j->to_json());
  });
  svr.Get("/health", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"status", "ok"}}); });

  if (options_.port == 0) {
    port_ = svr.bind_to_any_port(options_.host);
  } else {
    port_ = svr.bind_to_port(options_.host, options_.port) ? options_.port : -1;
  }
  if (port_ <= 0) {
    stop();
    fail(ErrorCode::kIo, "cannot bind " + options_.host + ":" + std::to_string(options_.port));
  }
  listener_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
}

void InferenceService::stop() {
  if (http_) {
    http_->stop();
    if (listener_.joinable()) listener_.join();
    http_.reset();
  }
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  work_cv_.notify_all();
  for (auto& t : workers_) {
    if (t.joinable()) t.join();
  }
  workers_.clear();
}

std::string InferenceService::handle_webhook(const std::string& body, const std::string& signature) {
  std::string sig = signature;
  if (sig.rfind("sha256=", 0) == 0) sig = sig.substr(7);
  if (sig.empty() || !digest_equal(sig, hmac_sha256_hex(options_.webhook_secret, body))) {
    fail(ErrorCode::kInvalidSignature, "webhook signature does not match");
  }
  nlohmann::json payload;
  try {
    payload = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformedPayload, std::string("webhook body is not JSON: ") + e.what());
  }
  if (!payload.is_object() || !payload.contains("interview_id") || !payload["interview_id"].is_number_integer() ||
      !payload.contains("recording_path") || !payload["recording_path"].is_string()) {
    fail(ErrorCode::kMalformedPayload, "webhook body needs integer interview_id and string recording_path");
  }
  InferenceJob job;
  job.job_id = "job-" + random_hex();
  job.interview_id = payload["interview_id"].get<int>();
  job.recording_path = payload["recording_path"].get<std::string>();
  job.created_at = utc_timestamp_now();
  job.updated_at = job.created_at;
  job.history.push_back(job_state_name(JobState::kQueued));
  const std::string id = job.job_id;
  {
    std::lock_guard lock(mutex_);
    if (queue_.size() >= options_.queue_capacity) {
      fail(ErrorCode::kQueueFull, "job queue is full (" + std::to_string(options_.queue_capacity) + ")");
    }
    queue_.push_back(id);
    jobs_.emplace(id, std::move(job));
  }
  work_cv_.notify_one();
  return id;
}

std::optional<InferenceJob> InferenceService::job(const std::string& job_id) const {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

std::vector<InferenceJob> InferenceService::jobs() const {
  std::lock_guard lock(mutex_);
  std::vector<InferenceJob> out;
  for (const auto& [id, j] : jobs_) out.push_back(j);
  return out;
}

std::size_t InferenceService::queue_length() const {
  std::lock_guard lock(mutex_);
  return queue_.size();
}

bool InferenceService::wait_until_idle(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  return idle_cv_.wait_for(lock, timeout, [this] { return queue_.empty() && running_ == 0; });
}

void InferenceService::worker_loop() {
  for (;;) {
    std::string id;
    {
      std::unique_lock lock(mutex_);
      work_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      id = queue_.front();
      queue_.pop_front();
      ++running_;
    }
    run_job(id);
    {
      std::lock_guard lock(mutex_);
      --running_;
    }
    idle_cv_.notify_all();
  }
}

void InferenceService::advance(const std::string& job_id, JobState next) {
  std::lock_guard lock(mutex_);
  InferenceJob& j = jobs_.at(job_id);
  if (j.terminal() || next == JobState::kDone || next == JobState::kFailed ||
      static_cast<int>(next) <= static_cast<int>(j.state)) {
    fail(ErrorCode::kValidation, std::string("illegal job transition ") + job_state_name(j.state) + " -> " +
                                     job_state_name(next));
  }
  j.state = next;
  j.updated_at = utc_timestamp_now();
  j.history.push_back(job_state_name(next));
}

void InferenceService::finish(const std::string& job_id, JobState terminal, const std::optional<std::string>& error,
                              const std::optional<std::string>& report_id) {
  std::lock_guard lock(mutex_);
  InferenceJob& j = jobs_.at(job_id);
  if (j.terminal()) return;
  if (terminal == JobState::kFailed) j.failed_stage = job_state_name(j.state);
  j.state = terminal;
  j.error = error;
  j.report_id = report_id;
  j.updated_at = utc_timestamp_now();
  j.history.push_back(job_state_name(terminal));
  j.completion_seq = completed_++;
}

void InferenceService::run_job(const std::string& job_id) {
  const InferenceJob snapshot = *job(job_id);
  const std::string report_id = "report-" + job_id.substr(4);
  try {
    ClinicalReport report = processor_(snapshot, report_id, [&](JobState s) { advance(job_id, s); });
    if (job(job_id)->state != JobState::kReporting) advance(job_id, JobState::kReporting);
    report.report_id = report_id;
    store_.put(report);
    finish(job_id, JobState::kDone, std::nullopt, report_id);
  } catch (const std::exception& e) {
    finish(job_id, JobState::kFailed, std::string(e.what()), std::nullopt);
  }
}

}  // namespace depscreen
