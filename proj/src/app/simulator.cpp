// SPDX-License-Identifier: Apache-2.0
#include "app/simulator.hpp"

#include <httplib.h>

#include "common/crypto.hpp"

namespace depscreen {

std::string webhook_signature(const std::string& secret, const std::string& body) {
  return "sha256=" + hmac_sha256_hex(secret, body);
}

nlohmann::json HttpResult::json() const {
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    return nullptr;
  }
}

HttpResult post_recording_completed(const std::string& base_url, const std::string& secret, int interview_id,
                                    const std::string& recording_path, bool tamper) {
  const nlohmann::json payload{{"event", "recording.completed"},
                               {"interview_id", interview_id},
                               {"recording_path", recording_path}};
  std::string body = payload.dump();
  const std::string signature = webhook_signature(secret, body);
  if (tamper) body.replace(body.find("recording.completed"), 19, "recording.c0mpleted");
  httplib::Client cli(base_url);
  cli.set_connection_timeout(5);
  httplib::Headers headers{{"X-Signature", signature}};
  const auto res = cli.Post("/webhooks/recording-completed", headers, body, "application/json");
  if (!res) return {};
  return {res->status, res->body};
}

HttpResult http_get(const std::string& base_url, const std::string& path) {
  httplib::Client cli(base_url);
  cli.set_connection_timeout(5);
  const auto res = cli.Get(path);
  if (!res) return {};
  return {res->status, res->body};
}

}  // namespace depscreen
