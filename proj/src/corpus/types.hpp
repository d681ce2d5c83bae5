// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace depscreen {

inline constexpr int kSampleRate = 16000;
inline constexpr double kFauFrameRate = 30.0;
inline constexpr int kPhqCutoff = 10;
inline constexpr std::size_t kFauIntensityCount = 14;
inline constexpr std::size_t kFauPresenceCount = 6;
inline constexpr std::size_t kFauColumns = kFauIntensityCount + kFauPresenceCount;

// Column order of every FAU table this project reads or writes.
inline constexpr std::array<std::string_view, kFauColumns> kFauColumnNames = {
    "AU01_r", "AU02_r", "AU04_r", "AU05_r", "AU06_r", "AU09_r", "AU10_r",
    "AU12_r", "AU14_r", "AU15_r", "AU17_r", "AU20_r", "AU25_r", "AU26_r",
    "AU04_c", "AU12_c", "AU15_c", "AU23_c", "AU28_c", "AU45_c"};

using Waveform = std::vector<float>;

enum class Label : std::uint8_t { kNotDepressed = 0, kDepressed = 1 };

inline Label label_for_score(int phq8) { return phq8 >= kPhqCutoff ? Label::kDepressed : Label::kNotDepressed; }
inline int label_bit(Label l) { return l == Label::kDepressed ? 1 : 0; }
inline std::string_view label_name(Label l) { return l == Label::kDepressed ? "depressed" : "not depressed"; }

// Raw corpus speakers are Ellie/Participant; normalized transcripts use
// Therapist/Patient.
enum class Speaker : std::uint8_t { kEllie, kParticipant, kTherapist, kPatient };

std::string_view speaker_name(Speaker s);
std::optional<Speaker> parse_speaker(std::string_view name);
inline bool is_patient(Speaker s) { return s == Speaker::kParticipant || s == Speaker::kPatient; }

struct Utterance {
  Speaker speaker = Speaker::kEllie;
  double start_time = 0.0;  // seconds
  double stop_time = 0.0;
  std::string text;

  bool operator==(const Utterance&) const = default;
};

struct FauFrame {
  double timestamp = 0.0;
  std::array<double, kFauIntensityCount> intensities{};
  std::array<std::uint8_t, kFauPresenceCount> presences{};

  bool operator==(const FauFrame&) const = default;
};

struct Interview {
  int id = 0;
  Waveform audio;  // mono, kSampleRate
  std::vector<Utterance> utterances;
  std::vector<FauFrame> fau_track;
  std::optional<int> phq8_score;  // absent for unlabeled recordings
  std::optional<Label> label;

  double duration_seconds() const { return static_cast<double>(audio.size()) / kSampleRate; }
  bool operator==(const Interview&) const = default;
};

// Returns one message per violated Interview invariant; empty when valid.
std::vector<std::string> validate_interview(const Interview& interview);

}  // namespace depscreen
