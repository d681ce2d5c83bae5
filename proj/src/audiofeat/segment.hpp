// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "corpus/types.hpp"

namespace depscreen {

inline constexpr double kSegmentSeconds = 8.0;
inline constexpr std::size_t kSegmentSamples = 128000;

// Maps positions in the concatenated patient-only signal back to the
// original recording.
class PatientTimeline {
 public:
  struct Piece {
    std::size_t source_start = 0;  // sample index in the recording
    std::size_t concat_start = 0;  // sample index in the concatenation
    std::size_t length = 0;
  };

  void append(std::size_t source_start, std::size_t length);
  std::size_t total_samples() const { return total_; }
  const std::vector<Piece>& pieces() const { return pieces_; }
  // Recording time (seconds) of a fractional concatenated sample position.
  double source_seconds(double concat_sample) const;

 private:
  std::vector<Piece> pieces_;
  std::size_t total_ = 0;
};

struct AudioSegmentation {
  std::vector<Waveform> segments;  // each exactly kSegmentSamples
  PatientTimeline timeline;        // segment k spans concat samples [k*128000, (k+1)*128000)
  std::size_t discarded_samples = 0;
};

// Crops patient utterances, concatenates them in time order and cuts
// consecutive 8 s chunks; the short tail is discarded.
AudioSegmentation segment_patient_audio(const Interview& interview);

}  // namespace depscreen
