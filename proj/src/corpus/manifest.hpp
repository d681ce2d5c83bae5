// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "corpus/corpus.hpp"
#include "corpus/types.hpp"

namespace depscreen {

struct TimeInterval {
  double start = 0.0;
  double stop = 0.0;
  bool operator==(const TimeInterval&) const = default;
};

// Per-interview corrections to the raw corpus. Stored as JSON; see
// data/error_manifest.json for the schema.
struct ErrorManifest {
  std::map<int, std::vector<TimeInterval>> trims;
  std::map<int, double> time_offsets;
  std::map<int, LabelEntry> label_overrides;
  std::set<int> missing_therapist;

  bool empty() const {
    return trims.empty() && time_offsets.empty() && label_overrides.empty() && missing_therapist.empty();
  }
};

ErrorManifest parse_error_manifest(const std::string& json_text);
ErrorManifest read_error_manifest(const std::filesystem::path& path);
std::string serialize_error_manifest(const ErrorManifest& manifest);

// Applies trims, then timestamp offsets, then label overrides for
// interview.id. Entries for other ids are ignored.
Interview apply_error_manifest(const Interview& interview, const ErrorManifest& manifest);

// Removes [cut.start, cut.stop) from audio, FAU track and transcript; later
// material shifts left by the cut length.
Interview trim_interval(const Interview& interview, const TimeInterval& cut);

}  // namespace depscreen
