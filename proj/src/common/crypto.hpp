// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

namespace depscreen {

std::string sha256_hex(std::string_view data);
std::string hmac_sha256_hex(std::string_view key, std::string_view data);
// Constant-time comparison of two hex digests.
bool digest_equal(std::string_view a, std::string_view b);

}  // namespace depscreen
