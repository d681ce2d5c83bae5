// SPDX-License-Identifier: Apache-2.0
#include "app/report_store.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "common/error.hpp"
#include "common/fs.hpp"

namespace depscreen {

ReportStore::ReportStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_ / "reports");
  const auto index = dir_ / "index.log";
  if (!std::filesystem::exists(index)) return;
  std::istringstream in(read_text_file(index));
  std::string line;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    // A torn final line (crash mid-append) is skipped, as is any entry whose
    // report file never landed.
    const auto cells = split(line, '\t');
    if (cells.size() != 2 || !valid_id(cells[1])) continue;
    if (!std::filesystem::exists(dir_ / "reports" / (cells[1] + ".json"))) continue;
    if (seen.insert(cells[1]).second) order_.push_back(cells[1]);
  }
}

bool ReportStore::valid_id(const std::string& id) {
  if (id.empty() || id.size() > 128) return false;
  return std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'; });
}

void ReportStore::put(const ClinicalReport& report) {
  if (!valid_id(report.report_id)) fail(ErrorCode::kValidation, "invalid report id '" + report.report_id + "'");
  std::lock_guard lock(mutex_);
  write_file_atomic(dir_ / "reports" / (report.report_id + ".json"), report.to_json().dump(2) + "\n");
  std::ofstream index(dir_ / "index.log", std::ios::app);
  index << order_.size() << '\t' << report.report_id << '\n';
  index.flush();
  if (!index) fail(ErrorCode::kIo, "cannot append to report index");
  order_.erase(std::remove(order_.begin(), order_.end(), report.report_id), order_.end());
  order_.push_back(report.report_id);
}

ClinicalReport ReportStore::get(const std::string& report_id) const {
  {
    std::lock_guard lock(mutex_);
    if (std::find(order_.begin(), order_.end(), report_id) == order_.end()) {
      fail(ErrorCode::kNotFound, "no report '" + report_id + "'");
    }
  }
  try {
    return ClinicalReport::from_json(Json::parse(read_text_file(dir_ / "reports" / (report_id + ".json"))));
  } catch (const Json::exception& e) {
    fail(ErrorCode::kMalformedPayload, "report file " + report_id + " is corrupt: " + e.what());
  }
}

std::vector<ClinicalReport> ReportStore::list() const {
  std::vector<std::string> ids;
  {
    std::lock_guard lock(mutex_);
    ids.assign(order_.rbegin(), order_.rend());
  }
  std::vector<ClinicalReport> out;
  for (const auto& id : ids) out.push_back(get(id));
  return out;
}

std::size_t ReportStore::size() const {
  std::lock_guard lock(mutex_);
  return order_.size();
}

}  // namespace depscreen
