// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "common/error.hpp"
#include "common/random.hpp"
#include "corpus/corpus.hpp"
#include "corpus/manifest.hpp"
#include "corpus/synth.hpp"
#include "corpus/wav.hpp"
#include "support.hpp"

using namespace depscreen;
using depscreen::testing::TempDir;
using depscreen::testing::code_of;

namespace {

// 30 s interview, utterances every 5 s, FAU at 30 fps.
Interview thirty_second_fixture() {
  Interview iv;
  iv.id = 1234;
  iv.audio.assign(30 * kSampleRate, 0.0F);
  for (std::size_t i = 0; i < iv.audio.size(); ++i) iv.audio[i] = static_cast<float>(i % 97) / 1000.0F;
  for (int k = 0; k < 6; ++k) {
    iv.utterances.push_back(
        {k % 2 == 0 ? Speaker::kEllie : Speaker::kParticipant, 5.0 * k, 5.0 * k + 4.0, "line " + std::to_string(k)});
  }
  for (int k = 0; k < 900; ++k) {
    FauFrame f;
    f.timestamp = k / 30.0;
    f.intensities.fill(0.5);
    iv.fau_track.push_back(f);
  }
  iv.phq8_score = 4;
  iv.label = Label::kNotDepressed;
  return iv;
}

}  // namespace

TEST_CASE("synthetic interviews round-trip through the on-disk layout") {
  TempDir dir;
  const auto corpus = synth_corpus(3, 0.5, 11);
  write_corpus(dir.path(), corpus, synth_exemplars(11));
  CHECK(list_interview_ids(dir.path()) == std::vector<int>{1000, 1001, 1002});
  for (const auto& iv : corpus) {
    const Interview back = load_interview(dir.path(), iv.id);
    CHECK(back == iv);
  }
  CHECK(list_interview_ids(dir.path() / "exemplars") == std::vector<int>{2000, 2001, 2002, 2003});
}

TEST_CASE("loading an absent interview reports MissingFile") {
  TempDir dir;
  write_corpus(dir.path(), synth_corpus(2, 0.5, 1));
  CHECK(code_of([&] { load_interview(dir.path(), 9999); }) == ErrorCode::kMissingFile);
}

TEST_CASE("a transcript row with the wrong column count is MalformedCsv") {
  TempDir dir;
  const auto corpus = synth_corpus(2, 0.5, 2);
  write_corpus(dir.path(), corpus);
  const auto paths = interview_paths(dir.path(), 1000);
  {
    std::ofstream out(paths.transcript, std::ios::app);
    out << "1.0\t2.0\tParticipant\n";
  }
  CHECK(code_of([&] { load_interview(dir.path(), 1000); }) == ErrorCode::kMalformedCsv);
}

TEST_CASE("audio at another sample rate is rejected") {
  TempDir dir;
  write_corpus(dir.path(), synth_corpus(2, 0.5, 3));
  const auto paths = interview_paths(dir.path(), 1001);
  write_wav(paths.audio, Waveform(8000, 0.0F), 8000, WavEncoding::kPcm16);
  CHECK(code_of([&] { load_interview(dir.path(), 1001); }) == ErrorCode::kSampleRateMismatch);
}

TEST_CASE("PCM16 audio loads with full-scale normalization") {
  TempDir dir;
  Waveform w = {0.0F, 0.5F, -0.5F, 1.0F, -1.0F};
  write_wav(dir / "a.wav", w, kSampleRate, WavEncoding::kPcm16);
  const auto back = read_wav(dir / "a.wav");
  CHECK(back.sample_rate == kSampleRate);
  REQUIRE(back.samples.size() == w.size());
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(back.samples[i] == doctest::Approx(w[i]).epsilon(1e-4));
}

TEST_CASE("synthetic corpus class counts follow round(n * fraction)") {
  const auto corpus = synth_corpus(10, 0.3, 7);
  int depressed = 0;
  for (const auto& iv : corpus) depressed += label_bit(*iv.label);
  CHECK(depressed == 3);
  CHECK(code_of([] { synth_corpus(10, 0.0, 7); }) == ErrorCode::kInvalidFraction);
  CHECK(code_of([] { synth_corpus(10, 1.0, 7); }) == ErrorCode::kInvalidFraction);
}

TEST_CASE("synthetic corpus is deterministic and valid") {
  const auto a = synth_corpus(6, 0.5, 42);
  const auto b = synth_corpus(6, 0.5, 42);
  CHECK(a == b);
  for (const auto& iv : a) {
    CHECK(validate_interview(iv).empty());
    double patient = 0.0;
    for (const auto& u : iv.utterances) {
      if (is_patient(u.speaker)) patient += u.stop_time - u.start_time;
    }
    CHECK(patient >= 40.0);
    CHECK(iv.id >= kSynthFirstId);
  }
  CHECK(synth_corpus(6, 0.5, 43) != a);
}

TEST_CASE("error manifest relabels the cutoff-score interview") {
  Interview iv = thirty_second_fixture();
  iv.id = 409;
  iv.phq8_score = 10;
  iv.label = Label::kNotDepressed;
  const auto manifest = read_error_manifest(depscreen::testing::data_dir() / "error_manifest.json");
  const Interview fixed = apply_error_manifest(iv, manifest);
  CHECK(fixed.label == Label::kDepressed);
  CHECK(fixed.phq8_score == 10);
}

TEST_CASE("shipped manifest encodes every known dataset correction") {
  const auto m = read_error_manifest(depscreen::testing::data_dir() / "error_manifest.json");
  CHECK(m.label_overrides.count(409) == 1);
  CHECK(m.trims.count(373) == 1);
  CHECK(m.trims.count(444) == 1);
  for (int id : {318, 321, 341, 362}) CHECK(m.time_offsets.count(id) == 1);
  CHECK(m.missing_therapist == std::set<int>{451, 458, 480});
}

TEST_CASE("empty manifest is the identity") {
  const Interview iv = thirty_second_fixture();
  CHECK(apply_error_manifest(iv, ErrorManifest{}) == iv);
}

TEST_CASE("trimming 10-20 s of a 30 s interview shifts later material left") {
  const Interview iv = thirty_second_fixture();
  ErrorManifest m;
  m.trims[iv.id] = {TimeInterval{10.0, 20.0}};
  const Interview out = apply_error_manifest(iv, m);
  CHECK(out.duration_seconds() == doctest::Approx(20.0));
  CHECK(out.fau_track.size() == iv.fau_track.size() - 300);
  bool found = false;
  for (const auto& u : out.utterances) {
    if (u.text == "line 5") {
      found = true;
      CHECK(u.start_time == doctest::Approx(15.0));
    }
  }
  CHECK(found);
  CHECK(validate_interview(out).empty());
  CHECK(out.audio[10 * kSampleRate] == iv.audio[20 * kSampleRate]);
}

TEST_CASE("manifest errors") {
  const Interview iv = thirty_second_fixture();
  ErrorManifest bad_interval;
  bad_interval.trims[iv.id] = {TimeInterval{25.0, 40.0}};
  CHECK(code_of([&] { apply_error_manifest(iv, bad_interval); }) == ErrorCode::kIntervalOutOfRange);

  ErrorManifest bad_override;
  bad_override.label_overrides[iv.id] = LabelEntry{12, Label::kNotDepressed};
  CHECK(code_of([&] { apply_error_manifest(iv, bad_override); }) == ErrorCode::kInconsistentOverride);
}

TEST_CASE("manifest JSON round-trips") {
  ErrorManifest m;
  m.trims[373] = {TimeInterval{1.5, 2.25}, TimeInterval{10.0, 12.0}};
  m.time_offsets[318] = -0.75;
  m.label_overrides[409] = LabelEntry{10, Label::kDepressed};
  m.missing_therapist = {451};
  const auto back = parse_error_manifest(serialize_error_manifest(m));
  CHECK(back.trims == m.trims);
  CHECK(back.time_offsets == m.time_offsets);
  CHECK(back.missing_therapist == m.missing_therapist);
  CHECK(back.label_overrides.at(409).phq8_score == 10);
  CHECK(back.label_overrides.at(409).label == Label::kDepressed);
}

TEST_CASE("random manifests keep interview invariants and never lengthen recordings") {
  const auto corpus = synth_corpus(4, 0.5, 5);
  Rng rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const Interview& iv = corpus[uniform_index(rng, corpus.size())];
    const double dur = iv.duration_seconds();
    ErrorManifest m;
    if (uniform01(rng) < 0.7) {
      const double a = uniform(rng, 0.0, dur * 0.5);
      const double b = std::min(dur, a + uniform(rng, 0.5, dur * 0.3));
      m.trims[iv.id] = {TimeInterval{a, b}};
    }
    const Interview out = apply_error_manifest(iv, m);
    CHECK(validate_interview(out).empty());
    CHECK(out.duration_seconds() <= dur + 1e-9);

    // Trim-free manifests are idempotent.
    ErrorManifest relabel;
    relabel.label_overrides[iv.id] = LabelEntry{*iv.phq8_score, *iv.label};
    const Interview once = apply_error_manifest(iv, relabel);
    CHECK(apply_error_manifest(once, relabel) == once);
  }
}

TEST_CASE("real corpus checks" * doctest::skip(std::getenv("DAIC_ROOT") == nullptr)) {
  const std::filesystem::path root = std::getenv("DAIC_ROOT");
  const Interview iv = load_interview(root, 301);
  CHECK(std::abs(iv.duration_seconds() - 770.0) <= 1.0);

  const auto manifest = read_error_manifest(depscreen::testing::data_dir() / "error_manifest.json");
  int depressed = 0, healthy = 0;
  for (const auto& [id, entry] : read_labels(root / "labels.csv")) {
    const auto override_it = manifest.label_overrides.find(id);
    const Label l = override_it != manifest.label_overrides.end() ? override_it->second.label : entry.label;
    (l == Label::kDepressed ? depressed : healthy) += 1;
  }
  CHECK(depressed == 56);
  CHECK(healthy == 133);
}
