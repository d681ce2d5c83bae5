// SPDX-License-Identifier: Apache-2.0
#include "features/features.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "audiofeat/segment.hpp"
#include "common/error.hpp"
#include "common/fs.hpp"
#include "common/random.hpp"
#include "corpus/corpus.hpp"

namespace depscreen {

static_assert(std::endian::native == std::endian::little, "feature files assume a little-endian host");

std::string SegmentFeatures::segment_id() const {
  return std::to_string(interview_id) + "_" + std::to_string(segment_index) + "_" + tag;
}

InterviewFeatures extract_interview_features(const Interview& interview, const FeatureConfig& cfg, std::uint64_t seed) {
  InterviewFeatures out;
  out.interview_id = interview.id;
  out.label = interview.label ? label_bit(*interview.label) : -1;

  const AudioSegmentation audio = segment_patient_audio(interview);
  const std::vector<FauMatrix> fau = segment_patient_fau(interview, audio);
  out.segment_count = audio.segments.size();

  const MfccExtractor extractor(cfg.mfcc);
  for (std::size_t k = 0; k < audio.segments.size(); ++k) {
    auto fau_ptr = std::make_shared<const RowMatrix>(fau[k].values);
    std::vector<AugmentedSample> variants;
    if (cfg.augmentation) {
      variants = make_augmented_set(audio.segments[k], derive_seed(seed, {static_cast<std::uint64_t>(interview.id), k}),
                                    cfg.augment);
    } else {
      variants.push_back(AugmentedSample{audio.segments[k], AugmentTag{}});
    }
    for (auto& v : variants) {
      SegmentFeatures s;
      s.interview_id = interview.id;
      s.segment_index = static_cast<int>(k);
      s.tag = v.tag.str();
      s.label = out.label;
      s.mfcc = std::make_shared<const RowMatrix>(cmvn(extractor.extract(v.waveform)).values);
      s.fau = fau_ptr;
      out.segments.push_back(std::move(s));
    }
  }
  return out;
}

void write_tensor(const std::filesystem::path& path, const RowMatrix& m) {
  std::string buf = "DSF1";
  const auto rows = static_cast<std::uint32_t>(m.rows());
  const auto cols = static_cast<std::uint32_t>(m.cols());
  buf.append(reinterpret_cast<const char*>(&rows), 4);
  buf.append(reinterpret_cast<const char*>(&cols), 4);
  buf.reserve(buf.size() + 4ULL * rows * cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const float f = static_cast<float>(m(r, c));
      buf.append(reinterpret_cast<const char*>(&f), 4);
    }
  }
  write_file_atomic(path, buf);
}

RowMatrix read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kMissingFeatures, path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 12 || data.compare(0, 4, "DSF1") != 0) fail(ErrorCode::kMissingFeatures, "bad tensor header: " + path.string());
  std::uint32_t rows = 0, cols = 0;
  std::memcpy(&rows, data.data() + 4, 4);
  std::memcpy(&cols, data.data() + 8, 4);
  if (data.size() != 12 + 4ULL * rows * cols) fail(ErrorCode::kMissingFeatures, "truncated tensor: " + path.string());
  RowMatrix m(rows, cols);
  const char* p = data.data() + 12;
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c, p += 4) {
      float f = 0.0F;
      std::memcpy(&f, p, 4);
      m(r, c) = f;
    }
  }
  return m;
}

namespace {
constexpr const char* kManifestHeader = "segment_id,interview_id,segment_index,tag,label,mfcc_path,fau_path";
}

void write_feature_store(const std::filesystem::path& dir, const std::vector<InterviewFeatures>& interviews) {
  std::filesystem::create_directories(dir / "mfcc");
  std::filesystem::create_directories(dir / "fau");
  std::ostringstream manifest;
  manifest << kManifestHeader << '\n';
  for (const auto& iv : interviews) {
    for (const auto& s : iv.segments) {
      const std::string mfcc_rel = "mfcc/" + s.segment_id() + ".bin";
      const std::string fau_rel = "fau/" + std::to_string(s.interview_id) + "_" + std::to_string(s.segment_index) + ".bin";
      write_tensor(dir / mfcc_rel, *s.mfcc);
      if (s.original() || !std::filesystem::exists(dir / fau_rel)) write_tensor(dir / fau_rel, *s.fau);
      manifest << s.segment_id() << ',' << s.interview_id << ',' << s.segment_index << ',' << s.tag << ',' << s.label
               << ',' << mfcc_rel << ',' << fau_rel << '\n';
    }
  }
  write_file_atomic(dir / "manifest.csv", manifest.str());
}

std::vector<InterviewFeatures> read_feature_store(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.csv";
  if (!std::filesystem::exists(manifest_path)) fail(ErrorCode::kMissingFeatures, manifest_path.string());
  std::istringstream in(read_text_file(manifest_path));
  std::string line;
  std::getline(in, line);
  if (trim(line) != kManifestHeader) fail(ErrorCode::kMalformedCsv, "unexpected feature manifest header");

  std::map<int, InterviewFeatures> by_id;
  std::map<std::string, std::shared_ptr<const RowMatrix>> fau_cache;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    if (f.size() != 7) fail(ErrorCode::kMalformedCsv, "feature manifest line " + std::to_string(line_no));
    SegmentFeatures s;
    s.interview_id = parse_int(f[1], "interview_id");
    s.segment_index = parse_int(f[2], "segment_index");
    s.tag = f[3];
    s.label = parse_int(f[4], "label");
    s.mfcc = std::make_shared<const RowMatrix>(read_tensor(dir / f[5]));
    auto& fau = fau_cache[f[6]];
    if (!fau) fau = std::make_shared<const RowMatrix>(read_tensor(dir / f[6]));
    s.fau = fau;
    auto& iv = by_id[s.interview_id];
    iv.interview_id = s.interview_id;
    iv.label = s.label;
    if (s.original()) ++iv.segment_count;
    iv.segments.push_back(std::move(s));
  }
  std::vector<InterviewFeatures> out;
  for (auto& [id, iv] : by_id) out.push_back(std::move(iv));
  return out;
}

}  // namespace depscreen
