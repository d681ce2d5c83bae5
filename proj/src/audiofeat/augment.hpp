// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "corpus/types.hpp"

namespace depscreen {

struct AugmentTag {
  double semitones = 0.0;
  bool noise = false;
  bool original = true;

  std::string str() const;
  static AugmentTag parse(const std::string& s);
  bool operator==(const AugmentTag&) const = default;
};

struct AugmentConfig {
  std::array<double, 3> semitones = {0.5, 2.0, 2.5};
  double noise_amplitude = 0.005;
};

// Phase-vocoder time stretch followed by band-limited resampling back to
// the input length. Shifting by 0 returns the input.
Waveform pitch_shift(std::span<const float> w, double semitones, int sample_rate = kSampleRate);

// Adds i.i.d. uniform noise in [-amplitude, amplitude].
Waveform inject_noise(std::span<const float> w, double amplitude, std::uint64_t seed);

struct AugmentedSample {
  Waveform waveform;
  AugmentTag tag;
};

// Entry 0 is the input; entries 1-6 are the 3 pitch shifts x {noise off, on}
// in a seeded order.
std::vector<AugmentedSample> make_augmented_set(std::span<const float> w, std::uint64_t seed,
                                                const AugmentConfig& cfg = {});

// Windowed-sinc resampling of a whole signal to out_len samples.
Waveform resample_to_length(std::span<const float> in, std::size_t out_len);

}  // namespace depscreen
