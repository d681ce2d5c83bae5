// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <doctest.h>
#include <functional>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "common/error.hpp"

namespace depscreen::testing {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& stem = "ds") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (stem + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

// Error code raised by fn; fails the test when nothing is thrown.
inline ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kInvalidArgument;
}

inline std::filesystem::path data_dir() { return DEPSCREEN_DATA_DIR; }
inline std::filesystem::path test_data_dir() { return DEPSCREEN_TEST_DATA_DIR; }

}  // namespace depscreen::testing
