// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "corpus/types.hpp"

namespace depscreen {

enum class WavEncoding { kPcm16, kFloat32 };

struct WavData {
  int sample_rate = 0;
  Waveform samples;  // mono, [-1, 1]
};

// Reads PCM 16-bit or IEEE float 32-bit RIFF files. Multi-channel input is
// downmixed by averaging.
WavData read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& samples, int sample_rate,
               WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace depscreen
