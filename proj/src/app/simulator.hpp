// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <json.hpp>

namespace depscreen {

// "sha256=" + hex HMAC-SHA256(secret, body).
std::string webhook_signature(const std::string& secret, const std::string& body);

struct HttpResult {
  int status = 0;  // 0 when the request never completed
  std::string body;
  nlohmann::json json() const;  // null unless the body parses
};

// Stands in for the conferencing platform: POSTs a signed
// recording-completed event to base_url (e.g. http://127.0.0.1:8080).
// With `tamper`, the body is altered after signing.
HttpResult post_recording_completed(const std::string& base_url, const std::string& secret, int interview_id,
                                    const std::string& recording_path, bool tamper = false);

HttpResult http_get(const std::string& base_url, const std::string& path);

}  // namespace depscreen
