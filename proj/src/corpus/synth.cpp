// SPDX-License-Identifier: Apache-2.0
#include "corpus/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/error.hpp"
#include "common/random.hpp"
#include "corpus/corpus.hpp"
#include "common/fs.hpp"
#include "corpus/manifest.hpp"

namespace depscreen {
namespace {

constexpr double kTwoPi = 6.283185307179586;

struct TherapistLine {
  const char* ident;
  const char* text;
};

const std::vector<TherapistLine>& therapist_lines() {
  static const std::vector<TherapistLine> lines = {
      {"how_doingV", "so how are you doing today"},
      {"where_originally", "where are you from originally"},
      {"thats_good", "that's good"},
      {"tell_me_more", "tell me more about that"},
      {"when_last_happy", "when was the last time you felt really happy"},
      {"how_sleep", "how easy is it for you to get a good night's sleep"},
      {"what_do_fun", "what do you enjoy doing for fun"},
      {"mhm", "mhm"},
      {"nice", "nice"},
      {"how_close_family", "how close are you to your family"},
      {"can_example", "can you give me an example of that"},
      {"what_advice", "what advice would you give yourself ten years ago"},
      {"i_see", "i see what you mean"},
      {"how_feeling_lately", "how have you been feeling lately"},
      {"do_travel", "do you travel a lot"},
      {"why", "why"},
  };
  return lines;
}

const std::vector<std::string>& neutral_patient_lines() {
  static const std::vector<std::string> lines = {
      "i'm from l_a originally",
      "i work in an office downtown",
      "um it's been okay i guess",
      "i live with my sister right now",
      "we moved to l_a when i was a kid",
      "i watch a lot of t_v in the evenings",
      "my job is pretty busy most weeks",
      "i usually take the bus to work",
      "i went to school in d_c for a while",
      "i have a dog and two cats",
      "<laughter> yeah that's true",
      "i think so yeah",
      "i cook dinner most nights",
      "my family lives about an hour away",
      "i studied business in college",
  };
  return lines;
}

const std::vector<std::string>& positive_patient_lines() {
  static const std::vector<std::string> lines = {
      "i'm doing pretty good actually",
      "i love going hiking on the weekends",
      "i sleep fine most nights",
      "i've been really happy with my new job",
      "my friends and i go out a lot",
      "i feel pretty optimistic about things",
      "it's been a nice day",
      "i enjoy playing guitar with my band",
  };
  return lines;
}

const std::vector<std::string>& depressed_patient_lines() {
  static const std::vector<std::string> lines = {
      "i've been feeling really down lately",
      "honestly i feel hopeless most days",
      "i can't sleep at night anymore",
      "i have no energy to do anything",
      "i don't enjoy anything like i used to",
      "sometimes i feel worthless",
      "i've been feeling really down and tired",
      "i have no energy <sigh> most mornings",
  };
  return lines;
}

double centi(double t) { return std::round(t * 100.0) / 100.0; }

// Adds a voiced, syllable-modulated harmonic signal over [start, stop).
void render_voice(Waveform& audio, double start, double stop, double base_f0, double depth, double rate,
                  double level, Rng& rng) {
  const auto first = static_cast<std::size_t>(std::llround(start * kSampleRate));
  const auto last = std::min(audio.size(), static_cast<std::size_t>(std::llround(stop * kSampleRate)));
  const double phase0 = uniform(rng, 0.0, kTwoPi);
  const double syllable_hz = uniform(rng, 3.0, 5.0);
  double phase = 0.0;
  for (std::size_t i = first; i < last; ++i) {
    const double t = static_cast<double>(i - first) / kSampleRate;
    const double f0 = base_f0 + depth * std::sin(kTwoPi * rate * t + phase0);
    phase += kTwoPi * f0 / kSampleRate;
    if (phase > kTwoPi * 64) phase -= kTwoPi * 64;
    const double syll = std::sin(kTwoPi * syllable_hz * t * 0.5);
    const double env = syll * syll;
    double s = 0.0;
    for (int k = 1; k <= 6; ++k) s += std::sin(phase * k) / k;
    audio[i] += static_cast<float>(level * env * s);
  }
}

}  // namespace

const std::vector<std::string>& synthetic_marker_phrases() {
  static const std::vector<std::string> markers = {
      "feeling really down", "hopeless", "can't sleep", "no energy", "don't enjoy anything", "worthless",
  };
  return markers;
}

Interview synth_interview(int id, bool depressed, std::uint64_t seed, double min_patient_seconds) {
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(id)}));
  Interview iv;
  iv.id = id;
  iv.phq8_score = depressed ? 10 + static_cast<int>(uniform_index(rng, 15)) : static_cast<int>(uniform_index(rng, 10));
  iv.label = label_for_score(*iv.phq8_score);

  const double patient_target = centi(uniform(rng, min_patient_seconds, min_patient_seconds + 8.0));
  double t = centi(uniform(rng, 0.5, 1.5));
  double patient_total = 0.0;
  const auto& tlines = therapist_lines();
  const auto& neutral = neutral_patient_lines();
  const auto& flavored = depressed ? depressed_patient_lines() : positive_patient_lines();
  bool marker_used = false;
  while (patient_total < patient_target) {
    const double t_len = centi(uniform(rng, 1.5, 3.0));
    const auto& tl = tlines[uniform_index(rng, tlines.size())];
    iv.utterances.push_back({Speaker::kEllie, t, centi(t + t_len), std::string(tl.ident) + " (" + tl.text + ")"});
    t = centi(t + t_len + uniform(rng, 0.3, 0.8));

    // Patients sometimes answer in two consecutive transcript rows.
    const int rows = uniform01(rng) < 0.3 ? 2 : 1;
    for (int r = 0; r < rows; ++r) {
      const double p_len = centi(uniform(rng, 3.0, 6.5));
      std::string text;
      if ((!marker_used && depressed) || uniform01(rng) < 0.35) {
        text = flavored[uniform_index(rng, flavored.size())];
        marker_used = true;
      } else {
        text = neutral[uniform_index(rng, neutral.size())];
      }
      iv.utterances.push_back({Speaker::kParticipant, t, centi(t + p_len), text});
      patient_total += p_len;
      t = centi(t + p_len + uniform(rng, 0.2, 0.6));
    }
    t = centi(t + uniform(rng, 0.2, 0.6));
  }
  const double duration = centi(t + 1.0);
  const auto n_samples = static_cast<std::size_t>(std::llround(duration * kSampleRate));

  iv.audio.assign(n_samples, 0.0f);
  for (auto& s : iv.audio) s = static_cast<float>(uniform(rng, -0.002, 0.002));
  const double patient_f0 = depressed ? uniform(rng, 95.0, 120.0) : uniform(rng, 150.0, 190.0);
  const double patient_depth = depressed ? uniform(rng, 3.0, 8.0) : uniform(rng, 25.0, 40.0);
  const double patient_rate = uniform(rng, 1.5, 3.5);
  for (const auto& u : iv.utterances) {
    if (is_patient(u.speaker)) {
      render_voice(iv.audio, u.start_time, u.stop_time, patient_f0, patient_depth, patient_rate, 0.25, rng);
    } else {
      render_voice(iv.audio, u.start_time, u.stop_time, 215.0, 25.0, 2.0, 0.2, rng);
    }
  }

  // Facial action units: AR(1) around per-interview means. Depressed
  // patients sit lower overall and move AU06/AU12 less.
  const double expressiveness = gaussian(rng, 0.0, 0.12);
  std::array<double, kFauIntensityCount> mean{}, sigma{};
  for (std::size_t j = 0; j < kFauIntensityCount; ++j) {
    mean[j] = std::max(0.05, uniform(rng, 0.7, 1.3) + expressiveness - (depressed ? 0.15 : 0.0));
    sigma[j] = 0.2;
  }
  if (depressed) {
    sigma[4] = 0.08;  // AU06_r
    sigma[7] = 0.08;  // AU12_r
  }
  std::array<double, kFauPresenceCount> presence_p{};
  for (auto& p : presence_p) p = uniform(rng, 0.1, 0.3);
  if (depressed) presence_p[1] *= 0.5;  // AU12_c

  const auto n_frames = static_cast<std::size_t>(std::llround(duration * kFauFrameRate));
  std::array<double, kFauIntensityCount> state = mean;
  constexpr double kRho = 0.9;
  iv.fau_track.reserve(n_frames);
  for (std::size_t k = 0; k < n_frames; ++k) {
    FauFrame f;
    f.timestamp = static_cast<double>(k) / kFauFrameRate;
    for (std::size_t j = 0; j < kFauIntensityCount; ++j) {
      state[j] = mean[j] + kRho * (state[j] - mean[j]) + sigma[j] * std::sqrt(1 - kRho * kRho) * gaussian(rng);
      f.intensities[j] = std::max(0.0, state[j]);
    }
    for (std::size_t j = 0; j < kFauPresenceCount; ++j) f.presences[j] = uniform01(rng) < presence_p[j] ? 1 : 0;
    iv.fau_track.push_back(f);
  }
  return iv;
}

std::vector<Interview> synth_corpus(int n, double depressed_fraction, std::uint64_t seed) {
  if (!(depressed_fraction > 0.0 && depressed_fraction < 1.0)) {
    fail(ErrorCode::kInvalidFraction, "depressed_fraction must lie in (0, 1)");
  }
  if (n < 2) fail(ErrorCode::kInvalidArgument, "synthetic corpus needs n >= 2");
  const int n_dep = static_cast<int>(std::lround(n * depressed_fraction));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, {0xC0FFEE}));
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);
  std::vector<bool> depressed(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n_dep; ++i) depressed[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;

  std::vector<Interview> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(synth_interview(kSynthFirstId + i, depressed[static_cast<std::size_t>(i)], seed));
  return out;
}

std::vector<Interview> synth_exemplars(std::uint64_t seed) {
  std::vector<Interview> out;
  for (int i = 0; i < 4; ++i) out.push_back(synth_interview(kSynthExemplarFirstId + i, i < 2, seed, 16.0));
  return out;
}

void write_corpus(const std::filesystem::path& root, const std::vector<Interview>& interviews,
                  const std::vector<Interview>& exemplars) {
  std::filesystem::create_directories(root);
  LabelTable labels;
  for (const auto& iv : interviews) {
    write_interview(root, iv);
    if (iv.phq8_score && iv.label) labels[iv.id] = LabelEntry{*iv.phq8_score, *iv.label};
  }
  write_labels(root / "labels.csv", labels);
  write_file_atomic(root / "error_manifest.json", serialize_error_manifest(ErrorManifest{}));
  if (!exemplars.empty()) write_corpus(root / "exemplars", exemplars);
}

}  // namespace depscreen
