// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace depscreen {

std::string read_text_file(const std::filesystem::path& path);
// Write to a sibling temp file, then rename over the destination.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::vector<std::string> split(std::string_view s, char delim);
std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

}  // namespace depscreen
