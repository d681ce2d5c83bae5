// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "audiofeat/segment.hpp"
#include "common/error.hpp"
#include "common/random.hpp"
#include "corpus/synth.hpp"
#include "features/features.hpp"
#include "visualfeat/fau.hpp"
#include "support.hpp"

using namespace depscreen;

namespace {

// Patient speaks 2-12 s and 20-30 s; FAU intensity column 0 carries the
// frame timestamp so alignment can be read back from the matrix.
Interview timed_fixture(double fps = 30.0) {
  Interview iv;
  iv.id = 7;
  iv.audio.assign(32 * kSampleRate, 0.1F);
  iv.utterances = {{Speaker::kPatient, 2.0, 12.0, "a"}, {Speaker::kTherapist, 12.5, 19.5, "b"},
                   {Speaker::kPatient, 20.0, 30.0, "c"}};
  const auto n = static_cast<int>(32 * fps);
  for (int k = 0; k < n; ++k) {
    FauFrame f;
    f.timestamp = k / fps;
    f.intensities[0] = f.timestamp;
    f.intensities[1] = 1.0 + (k % 5);
    f.presences[0] = k % 2;
    iv.fau_track.push_back(f);
  }
  return iv;
}

}  // namespace

TEST_CASE("FAU blocks align one-to-one with audio segments") {
  const Interview iv = timed_fixture();
  const auto audio = segment_patient_audio(iv);
  REQUIRE(audio.segments.size() == 2);
  const auto fau = segment_patient_fau(iv, audio);
  REQUIRE(fau.size() == 2);
  for (const auto& m : fau) {
    CHECK(m.values.rows() == 240);
    CHECK(m.values.cols() == 20);
  }
  // Segment 0 starts at 2.0 s; segment 1 starts 8 s of patient time later,
  // which is 10.0 s into the first utterance... i.e. 2 s + 8 s = 10 s.
  CHECK(std::abs(fau[0].values(0, 0) - 2.0) <= 1.0 / 30.0);
  CHECK(std::abs(fau[1].values(0, 0) - 10.0) <= 1.0 / 30.0);
  // Row 80 of segment 1 is 16/3 s later in patient time, past the gap.
  CHECK(std::abs(fau[1].values(80, 0) - (20.0 + (10.0 + 80.0 / 30.0 - 12.0))) <= 1.0 / 30.0);
  // Therapist time never contributes.
  for (const auto& m : fau) {
    for (Eigen::Index r = 0; r < m.values.rows(); ++r) {
      const double t = m.values(r, 0);
      CHECK_FALSE((t > 12.0 + 1.0 / 30 && t < 20.0 - 1.0 / 30));
    }
  }
}

TEST_CASE("dropped FAU frames are filled by the nearest timestamp") {
  Interview iv = timed_fixture();
  // Drop every third frame between 4 and 6 s.
  std::vector<FauFrame> kept;
  for (const auto& f : iv.fau_track) {
    const auto k = static_cast<int>(std::lround(f.timestamp * 30));
    if (f.timestamp > 4.0 && f.timestamp < 6.0 && k % 3 == 0) continue;
    kept.push_back(f);
  }
  iv.fau_track = kept;
  const auto audio = segment_patient_audio(iv);
  const auto fau = segment_patient_fau(iv, audio);
  REQUIRE(fau.size() == 2);
  CHECK(fau[0].values.rows() == 240);
}

TEST_CASE("missing FAU coverage over a second is an alignment gap") {
  Interview iv = timed_fixture();
  std::vector<FauFrame> kept;
  for (const auto& f : iv.fau_track) {
    if (f.timestamp > 4.0 && f.timestamp < 7.0) continue;
    kept.push_back(f);
  }
  iv.fau_track = kept;
  const auto audio = segment_patient_audio(iv);
  try {
    segment_patient_fau(iv, audio);
    FAIL("expected AlignmentGap");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kAlignmentGap);
  }
}

TEST_CASE("no audio segments gives no FAU blocks") {
  Interview iv = timed_fixture();
  iv.utterances = {{Speaker::kPatient, 2.0, 6.0, "short"}};
  const auto audio = segment_patient_audio(iv);
  CHECK(segment_patient_fau(iv, audio).empty());
}

TEST_CASE("scaler statistics match a direct two-pass computation") {
  Rng rng(3);
  std::vector<FauMatrix> train(2);
  for (auto& m : train) {
    m.values = RowMatrix::Zero(240, 20);
    for (Eigen::Index r = 0; r < 240; ++r) {
      for (Eigen::Index c = 0; c < 14; ++c) m.values(r, c) = uniform(rng, 0.0, 3.0) + c;
      for (Eigen::Index c = 14; c < 20; ++c) m.values(r, c) = uniform01(rng) < 0.3 ? 1.0 : 0.0;
    }
  }
  const FauScaler s = fit_fau_scaler(train);
  for (Eigen::Index c = 0; c < 14; ++c) {
    double sum = 0.0;
    for (const auto& m : train) sum += m.values.col(c).sum();
    const double mean = sum / 480.0;
    double ss = 0.0;
    for (const auto& m : train) ss += (m.values.col(c).array() - mean).square().sum();
    const double sd = std::sqrt(ss / 480.0);
    CHECK(s.means[static_cast<std::size_t>(c)] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(s.stds[static_cast<std::size_t>(c)] == doctest::Approx(sd).epsilon(1e-12));
    CHECK_FALSE(s.degenerate[static_cast<std::size_t>(c)]);
  }

  // Pooled training data becomes standardized; presence columns pass through.
  std::vector<FauMatrix> scaled;
  for (const auto& m : train) scaled.push_back(apply_fau_scaler(m, s));
  for (Eigen::Index c = 0; c < 20; ++c) {
    double sum = 0.0, ss = 0.0;
    for (const auto& m : scaled) sum += m.values.col(c).sum();
    const double mean = sum / 480.0;
    for (const auto& m : scaled) ss += (m.values.col(c).array() - mean).square().sum();
    if (c < 14) {
      CHECK(std::abs(mean) <= 1e-6);
      CHECK(std::abs(std::sqrt(ss / 480.0) - 1.0) <= 1e-6);
    } else {
      for (std::size_t i = 0; i < 2; ++i) CHECK(scaled[i].values.col(c) == train[i].values.col(c));
    }
  }

  // Applying twice is not the same as once; the pipeline must apply once.
  const FauMatrix twice = apply_fau_scaler(scaled[0], s);
  CHECK((twice.values - scaled[0].values).cwiseAbs().maxCoeff() > 1e-3);

  CHECK(FauScaler::from_json(s.to_json()) == s);
}

TEST_CASE("zero matrix gives degenerate columns") {
  const FauScaler s = fit_fau_scaler(std::vector<FauMatrix>{FauMatrix{RowMatrix::Zero(240, 20)}});
  for (std::size_t j = 0; j < 14; ++j) {
    CHECK(s.means[j] == 0.0);
    CHECK(s.degenerate[j]);
    CHECK(s.stds[j] == 1.0);
  }
  CHECK_THROWS_AS(fit_fau_scaler(std::vector<FauMatrix>{}), Error);
}

TEST_CASE("presence pattern survives scaling") {
  FauMatrix m{RowMatrix::Zero(240, 20)};
  const double pattern[4] = {0, 1, 1, 0};
  for (Eigen::Index r = 0; r < 240; ++r) {
    m.values(r, 15) = pattern[r % 4];
    m.values(r, 2) = static_cast<double>(r);
  }
  const FauScaler s = fit_fau_scaler(std::vector<FauMatrix>{m});
  const FauMatrix out = apply_fau_scaler(m, s);
  CHECK(out.values.col(15) == m.values.col(15));
}

TEST_CASE("synthetic interviews have equal audio and FAU segment counts") {
  for (const auto& iv : synth_corpus(6, 0.5, 21)) {
    const auto audio = segment_patient_audio(iv);
    CHECK(audio.segments.size() >= 5);
    CHECK(segment_patient_fau(iv, audio).size() == audio.segments.size());
  }
}

TEST_CASE("interview features pair every audio variant with its segment's FAU block") {
  const Interview iv = synth_interview(1000, true, 4);
  FeatureConfig cfg;
  const InterviewFeatures f = extract_interview_features(iv, cfg, 77);
  CHECK(f.segments.size() == 7 * f.segment_count);
  std::set<std::pair<int, std::string>> keys;
  for (const auto& s : f.segments) {
    keys.insert({s.segment_index, s.tag});
    CHECK(s.mfcc->rows() == 247);
    CHECK(s.mfcc->cols() == 60);
    const auto& orig = *std::find_if(f.segments.begin(), f.segments.end(), [&](const SegmentFeatures& o) {
      return o.segment_index == s.segment_index && o.original();
    });
    CHECK(orig.fau.get() == s.fau.get());
  }
  CHECK(keys.size() == f.segments.size());

  depscreen::testing::TempDir dir;
  write_feature_store(dir.path(), {f});
  const auto back = read_feature_store(dir.path());
  REQUIRE(back.size() == 1);
  CHECK(back[0].segment_count == f.segment_count);
  REQUIRE(back[0].segments.size() == f.segments.size());
  for (std::size_t i = 0; i < f.segments.size(); ++i) {
    CHECK(back[0].segments[i].tag == f.segments[i].tag);
    CHECK((back[0].segments[i].mfcc->cast<float>().cast<double>() - *back[0].segments[i].mfcc).norm() == 0.0);
    CHECK((*back[0].segments[i].mfcc - *f.segments[i].mfcc).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("tensor file layout") {
  depscreen::testing::TempDir dir;
  RowMatrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6.5;
  write_tensor(dir / "t.bin", m);
  std::ifstream in(dir / "t.bin", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  REQUIRE(bytes.size() == 12 + 24);
  CHECK(bytes.substr(0, 4) == "DSF1");
  CHECK(static_cast<unsigned char>(bytes[4]) == 2);
  CHECK(static_cast<unsigned char>(bytes[8]) == 3);
  float last = 0;
  std::memcpy(&last, bytes.data() + 32, 4);
  CHECK(last == 6.5F);
  CHECK(read_tensor(dir / "t.bin") == m);
}
