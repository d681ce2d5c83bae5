// SPDX-License-Identifier: Apache-2.0
#include "corpus/manifest.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "common/error.hpp"
#include "common/fs.hpp"

namespace depscreen {

using nlohmann::json;

ErrorManifest parse_error_manifest(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kValidation, std::string("error manifest: ") + e.what());
  }
  ErrorManifest m;
  try {
    for (const auto& t : doc.value("trims", json::array())) {
      auto& list = m.trims[t.at("id").get<int>()];
      for (const auto& iv : t.at("intervals")) list.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
    }
    for (const auto& o : doc.value("time_offsets", json::array())) {
      m.time_offsets[o.at("id").get<int>()] = o.at("seconds").get<double>();
    }
    for (const auto& o : doc.value("label_overrides", json::array())) {
      const int bit = o.at("label").get<int>();
      m.label_overrides[o.at("id").get<int>()] =
          LabelEntry{o.at("phq8_score").get<int>(), bit == 1 ? Label::kDepressed : Label::kNotDepressed};
    }
    for (const auto& id : doc.value("missing_therapist", json::array())) m.missing_therapist.insert(id.get<int>());
  } catch (const json::exception& e) {
    fail(ErrorCode::kValidation, std::string("error manifest: ") + e.what());
  }
  return m;
}

ErrorManifest read_error_manifest(const std::filesystem::path& path) {
  return parse_error_manifest(read_text_file(path));
}

std::string serialize_error_manifest(const ErrorManifest& m) {
  json doc;
  doc["trims"] = json::array();
  for (const auto& [id, list] : m.trims) {
    json intervals = json::array();
    for (const auto& iv : list) intervals.push_back({iv.start, iv.stop});
    doc["trims"].push_back({{"id", id}, {"intervals", intervals}});
  }
  doc["time_offsets"] = json::array();
  for (const auto& [id, s] : m.time_offsets) doc["time_offsets"].push_back({{"id", id}, {"seconds", s}});
  doc["label_overrides"] = json::array();
  for (const auto& [id, e] : m.label_overrides) {
    doc["label_overrides"].push_back({{"id", id}, {"phq8_score", e.phq8_score}, {"label", label_bit(e.label)}});
  }
  doc["missing_therapist"] = json(std::vector<int>(m.missing_therapist.begin(), m.missing_therapist.end()));
  return doc.dump(2) + "\n";
}

Interview trim_interval(const Interview& in, const TimeInterval& cut) {
  Interview out = in;
  const double len = cut.stop - cut.start;
  const auto a = static_cast<std::size_t>(std::llround(cut.start * kSampleRate));
  const auto b = std::min(out.audio.size(), static_cast<std::size_t>(std::llround(cut.stop * kSampleRate)));
  out.audio.erase(out.audio.begin() + static_cast<std::ptrdiff_t>(a), out.audio.begin() + static_cast<std::ptrdiff_t>(b));

  out.fau_track.clear();
  for (FauFrame f : in.fau_track) {
    if (f.timestamp >= cut.start && f.timestamp < cut.stop) continue;
    if (f.timestamp >= cut.stop) f.timestamp -= len;
    out.fau_track.push_back(f);
  }

  out.utterances.clear();
  for (Utterance u : in.utterances) {
    if (u.stop_time <= cut.start) {
      out.utterances.push_back(std::move(u));
      continue;
    }
    if (u.start_time >= cut.stop) {
      u.start_time -= len;
      u.stop_time -= len;
      out.utterances.push_back(std::move(u));
      continue;
    }
    // Straddles the cut: keep the parts outside it.
    const double start = std::min(u.start_time, cut.start);
    const double stop = u.stop_time > cut.stop ? u.stop_time - len : cut.start;
    if (stop > start) {
      u.start_time = start;
      u.stop_time = stop;
      out.utterances.push_back(std::move(u));
    }
  }
  return out;
}

Interview apply_error_manifest(const Interview& interview, const ErrorManifest& manifest) {
  Interview out = interview;
  const double duration = interview.duration_seconds();

  if (auto it = manifest.trims.find(interview.id); it != manifest.trims.end()) {
    auto cuts = it->second;
    std::sort(cuts.begin(), cuts.end(), [](const auto& x, const auto& y) { return x.start < y.start; });
    for (std::size_t i = 0; i < cuts.size(); ++i) {
      const auto& c = cuts[i];
      if (!(c.start >= 0.0 && c.start < c.stop && c.stop <= duration)) {
        fail(ErrorCode::kIntervalOutOfRange, "trim interval outside interview " + std::to_string(interview.id));
      }
      if (i > 0 && c.start < cuts[i - 1].stop) {
        fail(ErrorCode::kIntervalOutOfRange, "overlapping trims for interview " + std::to_string(interview.id));
      }
    }
    // Latest first so earlier coordinates stay valid.
    for (auto c = cuts.rbegin(); c != cuts.rend(); ++c) out = trim_interval(out, *c);
  }

  if (auto it = manifest.time_offsets.find(interview.id); it != manifest.time_offsets.end() && it->second != 0.0) {
    const double shift = it->second;
    const double dur = out.duration_seconds();
    std::vector<Utterance> shifted;
    for (Utterance u : out.utterances) {
      u.start_time = std::clamp(u.start_time + shift, 0.0, dur);
      u.stop_time = std::clamp(u.stop_time + shift, 0.0, dur);
      if (u.stop_time > u.start_time) shifted.push_back(std::move(u));
    }
    out.utterances = std::move(shifted);
  }

  if (auto it = manifest.label_overrides.find(interview.id); it != manifest.label_overrides.end()) {
    const LabelEntry& e = it->second;
    if (label_for_score(e.phq8_score) != e.label || e.phq8_score < 0 || e.phq8_score > 24) {
      fail(ErrorCode::kInconsistentOverride, "override for interview " + std::to_string(interview.id) +
                                                 " violates the PHQ-8 cutoff rule");
    }
    out.phq8_score = e.phq8_score;
    out.label = e.label;
  }

  if (manifest.missing_therapist.count(interview.id) != 0) {
    const bool has_therapist = std::any_of(out.utterances.begin(), out.utterances.end(),
                                           [](const Utterance& u) { return !is_patient(u.speaker); });
    if (!has_therapist) {
      spdlog::warn("interview {} has no therapist utterances; supply a corrected transcript", interview.id);
    }
  }
  return out;
}

}  // namespace depscreen
