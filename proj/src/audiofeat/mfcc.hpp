// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <span>

#include "common/matrix.hpp"
#include "corpus/types.hpp"

namespace depscreen {

enum class FramingPolicy { kTruncatedUncentered, kPaddedCentered };

struct MfccConfig {
  int sample_rate = kSampleRate;
  int n_mfcc = 60;
  double window_ms = 124.0;
  double overlap_ms = 92.0;
  int n_mels = 128;
  double fmin_hz = 0.0;
  double fmax_hz = 8000.0;
  FramingPolicy framing = FramingPolicy::kTruncatedUncentered;

  double hop_ms() const { return window_ms - overlap_ms; }
  int window_samples() const;
  // Throws InvalidArgument unless the hop is a whole number of samples.
  int hop_samples() const;
  void validate() const;
  std::size_t frame_count(std::size_t n_samples) const;
};

struct MfccMatrix {
  RowMatrix values;  // [n_frames x n_mfcc]
};

// Hann window -> |FFT| -> Slaney mel filter bank -> log10 -> orthonormal
// DCT-II, keeping the first n_mfcc coefficients.
class MfccExtractor {
 public:
  explicit MfccExtractor(const MfccConfig& cfg);
  ~MfccExtractor();
  MfccExtractor(const MfccExtractor&) = delete;
  MfccExtractor& operator=(const MfccExtractor&) = delete;

  MfccMatrix extract(std::span<const float> waveform) const;
  const MfccConfig& config() const { return cfg_; }
  const RowMatrix& mel_filters() const { return mel_; }

 private:
  struct Plan;
  MfccConfig cfg_;
  std::unique_ptr<Plan> plan_;
  Eigen::VectorXd window_;
  RowMatrix mel_;  // [n_mels x n_bins]
  RowMatrix dct_;  // [n_mfcc x n_mels]
};

MfccMatrix extract_mfcc(std::span<const float> waveform, const MfccConfig& cfg);

// Per-column standardization over frames. Zero-variance columns map to 0.
MfccMatrix cmvn(const MfccMatrix& m);

double hz_to_mel_slaney(double hz);
double mel_to_hz_slaney(double mel);

}  // namespace depscreen
