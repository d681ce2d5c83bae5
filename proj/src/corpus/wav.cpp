// SPDX-License-Identifier: Apache-2.0
#include "corpus/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "common/error.hpp"
#include "common/fs.hpp"

namespace depscreen {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const std::string& buf, std::size_t off) {
  T v{};
  std::memcpy(&v, buf.data() + off, sizeof(T));
  return v;
}

template <typename T>
void put_le(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

}  // namespace

WavData read_wav(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::kMissingFile, path.string());
  const std::string buf = read_text_file(path);
  if (buf.size() < 12 || buf.compare(0, 4, "RIFF") != 0 || buf.compare(8, 4, "WAVE") != 0) {
    fail(ErrorCode::kIo, "not a RIFF/WAVE file: " + path.string());
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t data_off = 0, data_len = 0;
  std::size_t off = 12;
  while (off + 8 <= buf.size()) {
    const std::string id = buf.substr(off, 4);
    const auto len = read_le<std::uint32_t>(buf, off + 4);
    const std::size_t body = off + 8;
    if (id == "fmt " && body + 16 <= buf.size()) {
      format = read_le<std::uint16_t>(buf, body);
      channels = read_le<std::uint16_t>(buf, body + 2);
      rate = read_le<std::uint32_t>(buf, body + 4);
      bits = read_le<std::uint16_t>(buf, body + 14);
      if (format == kFormatExtensible && len >= 26 && body + 26 <= buf.size()) {
        format = read_le<std::uint16_t>(buf, body + 24);
      }
    } else if (id == "data") {
      data_off = body;
      data_len = std::min<std::size_t>(len, buf.size() - body);
      break;
    }
    off = body + len + (len & 1U);
  }
  if (channels == 0 || data_off == 0) fail(ErrorCode::kIo, "missing fmt/data chunk: " + path.string());

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    fail(ErrorCode::kIo, "unsupported WAV encoding (format " + std::to_string(format) + ", " +
                             std::to_string(bits) + " bits): " + path.string());
  }
  const std::size_t width = bits / 8;
  const std::size_t frames = data_len / (width * channels);
  WavData out;
  out.sample_rate = static_cast<int>(rate);
  out.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t pos = data_off + (i * channels + c) * width;
      acc += pcm16 ? read_le<std::int16_t>(buf, pos) / 32768.0 : read_le<float>(buf, pos);
    }
    out.samples[i] = static_cast<float>(acc / channels);
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const Waveform& samples, int sample_rate,
               WavEncoding encoding) {
  const bool f32 = encoding == WavEncoding::kFloat32;
  const std::uint16_t bits = f32 ? 32 : 16;
  const std::uint32_t data_len = static_cast<std::uint32_t>(samples.size() * (bits / 8));
  std::string buf;
  buf.reserve(44 + data_len);
  buf += "RIFF";
  put_le<std::uint32_t>(buf, 36 + data_len);
  buf += "WAVEfmt ";
  put_le<std::uint32_t>(buf, 16);
  put_le<std::uint16_t>(buf, f32 ? kFormatFloat : kFormatPcm);
  put_le<std::uint16_t>(buf, 1);
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(sample_rate));
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(sample_rate) * (bits / 8));
  put_le<std::uint16_t>(buf, bits / 8);
  put_le<std::uint16_t>(buf, bits);
  buf += "data";
  put_le<std::uint32_t>(buf, data_len);
  for (float s : samples) {
    if (f32) {
      put_le<float>(buf, s);
    } else {
      const double clamped = std::clamp(static_cast<double>(s), -1.0, 32767.0 / 32768.0);
      put_le<std::int16_t>(buf, static_cast<std::int16_t>(std::lround(clamped * 32768.0)));
    }
  }
  write_file_atomic(path, buf);
}

}  // namespace depscreen
