// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include "audiofeat/segment.hpp"
#include "common/matrix.hpp"
#include "corpus/types.hpp"

namespace depscreen {

inline constexpr std::size_t kFauSegmentRows = 240;  // 8 s at 30 frames/s

struct FauMatrix {
  RowMatrix values;  // [240 x 20]; columns 0-13 intensities, 14-19 presences
};

struct FauScaler {
  std::array<double, kFauIntensityCount> means{};
  std::array<double, kFauIntensityCount> stds{};
  std::array<bool, kFauIntensityCount> degenerate{};

  std::string to_json() const;
  static FauScaler from_json(const std::string& text);
  bool operator==(const FauScaler&) const = default;
};

// One [240 x 20] block per audio segment. Row r of block k is the FAU frame
// nearest in time to patient-speech position k*8 s + r/30 s.
std::vector<FauMatrix> segment_patient_fau(const Interview& interview, const AudioSegmentation& audio);

FauScaler fit_fau_scaler(const std::vector<FauMatrix>& training);
FauScaler fit_fau_scaler(const std::vector<const FauMatrix*>& training);
FauMatrix apply_fau_scaler(const FauMatrix& m, const FauScaler& scaler);

}  // namespace depscreen
