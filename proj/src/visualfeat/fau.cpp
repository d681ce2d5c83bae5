// SPDX-License-Identifier: Apache-2.0
#include "visualfeat/fau.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "common/error.hpp"

namespace depscreen {

std::vector<FauMatrix> segment_patient_fau(const Interview& interview, const AudioSegmentation& audio) {
  std::vector<FauMatrix> out;
  if (audio.segments.empty()) return out;
  const auto& track = interview.fau_track;
  if (track.empty()) fail(ErrorCode::kAlignmentGap, "interview " + std::to_string(interview.id) + " has no FAU frames");

  std::vector<double> stamps(track.size());
  for (std::size_t i = 0; i < track.size(); ++i) stamps[i] = track[i].timestamp;

  constexpr double kSamplesPerRow = static_cast<double>(kSampleRate) / kFauFrameRate;
  constexpr double kMaxGapSeconds = 1.0;
  out.reserve(audio.segments.size());
  for (std::size_t k = 0; k < audio.segments.size(); ++k) {
    FauMatrix m;
    m.values.resize(kFauSegmentRows, kFauColumns);
    for (std::size_t r = 0; r < kFauSegmentRows; ++r) {
      const double pos = static_cast<double>(k * kSegmentSamples) + static_cast<double>(r) * kSamplesPerRow;
      const double t = audio.timeline.source_seconds(pos);
      auto it = std::lower_bound(stamps.begin(), stamps.end(), t);
      std::size_t idx = static_cast<std::size_t>(it - stamps.begin());
      if (idx == stamps.size() || (idx > 0 && t - stamps[idx - 1] <= stamps[idx] - t)) idx = idx == 0 ? 0 : idx - 1;
      if (std::abs(stamps[idx] - t) > kMaxGapSeconds) {
        fail(ErrorCode::kAlignmentGap, "interview " + std::to_string(interview.id) + ": no FAU frame within 1 s of t=" +
                                           std::to_string(t));
      }
      const FauFrame& f = track[idx];
      const auto row = static_cast<Eigen::Index>(r);
      for (std::size_t j = 0; j < kFauIntensityCount; ++j) m.values(row, static_cast<Eigen::Index>(j)) = f.intensities[j];
      for (std::size_t j = 0; j < kFauPresenceCount; ++j) {
        m.values(row, static_cast<Eigen::Index>(kFauIntensityCount + j)) = f.presences[j];
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

FauScaler fit_fau_scaler(const std::vector<const FauMatrix*>& training) {
  if (training.empty()) fail(ErrorCode::kEmptyTrainingSet, "cannot fit FAU scaler on no data");
  FauScaler s;
  double count = 0.0;
  std::array<double, kFauIntensityCount> sum{};
  for (const FauMatrix* m : training) {
    count += static_cast<double>(m->values.rows());
    for (std::size_t j = 0; j < kFauIntensityCount; ++j) sum[j] += m->values.col(static_cast<Eigen::Index>(j)).sum();
  }
  for (std::size_t j = 0; j < kFauIntensityCount; ++j) s.means[j] = sum[j] / count;
  std::array<double, kFauIntensityCount> sq{};
  for (const FauMatrix* m : training) {
    for (std::size_t j = 0; j < kFauIntensityCount; ++j) {
      sq[j] += (m->values.col(static_cast<Eigen::Index>(j)).array() - s.means[j]).square().sum();
    }
  }
  for (std::size_t j = 0; j < kFauIntensityCount; ++j) {
    const double sd = std::sqrt(sq[j] / count);
    s.degenerate[j] = !(sd > 1e-12 * std::max(1.0, std::abs(s.means[j])));
    s.stds[j] = s.degenerate[j] ? 1.0 : sd;
  }
  return s;
}

FauScaler fit_fau_scaler(const std::vector<FauMatrix>& training) {
  std::vector<const FauMatrix*> ptrs;
  ptrs.reserve(training.size());
  for (const auto& m : training) ptrs.push_back(&m);
  return fit_fau_scaler(ptrs);
}

FauMatrix apply_fau_scaler(const FauMatrix& m, const FauScaler& s) {
  FauMatrix out = m;
  for (std::size_t j = 0; j < kFauIntensityCount; ++j) {
    auto col = out.values.col(static_cast<Eigen::Index>(j));
    col = (col.array() - s.means[j]) / s.stds[j];
  }
  return out;
}

std::string FauScaler::to_json() const {
  nlohmann::json doc = nlohmann::json::array();
  for (std::size_t j = 0; j < kFauIntensityCount; ++j) {
    doc.push_back({{"column", kFauColumnNames[j]}, {"mean", means[j]}, {"std", stds[j]}, {"degenerate", degenerate[j]}});
  }
  return doc.dump(2);
}

FauScaler FauScaler::from_json(const std::string& text) {
  FauScaler s;
  try {
    const auto doc = nlohmann::json::parse(text);
    if (!doc.is_array() || doc.size() != kFauIntensityCount) fail(ErrorCode::kValidation, "scaler needs 14 entries");
    for (std::size_t j = 0; j < kFauIntensityCount; ++j) {
      s.means[j] = doc[j].at("mean").get<double>();
      s.stds[j] = doc[j].at("std").get<double>();
      s.degenerate[j] = doc[j].at("degenerate").get<bool>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kValidation, std::string("scaler: ") + e.what());
  }
  return s;
}

}  // namespace depscreen
