// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "llm/llm.hpp"

namespace depscreen {

// Directory of report files (reports/<id>.json, each written atomically)
// plus an append-only index.log recording completion order. Reopening the
// directory restores every indexed report.
class ReportStore {
 public:
  explicit ReportStore(std::filesystem::path dir);

  void put(const ClinicalReport& report);
  ClinicalReport get(const std::string& report_id) const;  // NotFound
  // Newest completion first.
  std::vector<ClinicalReport> list() const;
  std::size_t size() const;
  const std::filesystem::path& dir() const { return dir_; }

  static bool valid_id(const std::string& id);

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  std::vector<std::string> order_;  // completion order
};

}  // namespace depscreen
