// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "audiofeat/augment.hpp"
#include "audiofeat/mfcc.hpp"
#include "visualfeat/fau.hpp"

namespace depscreen {

struct FeatureConfig {
  MfccConfig mfcc;
  AugmentConfig augment;
  bool augmentation = true;  // false keeps only the original of each segment
};

// One audio variant of one 8 s segment. The FAU block is shared by all
// variants of the same segment and is stored unscaled.
struct SegmentFeatures {
  int interview_id = 0;
  int segment_index = 0;
  std::string tag;  // AugmentTag::str()
  int label = -1;   // -1 when unlabeled
  std::shared_ptr<const RowMatrix> mfcc;  // CMVN-normalized [frames x n_mfcc]
  std::shared_ptr<const RowMatrix> fau;   // [240 x 20]

  bool original() const { return tag == "orig"; }
  std::string segment_id() const;
};

struct InterviewFeatures {
  int interview_id = 0;
  int label = -1;
  std::size_t segment_count = 0;  // before augmentation
  std::vector<SegmentFeatures> segments;
};

// Audio segmentation, augmentation, MFCC+CMVN and FAU alignment for one
// interview whose transcript is already normalized.
InterviewFeatures extract_interview_features(const Interview& interview, const FeatureConfig& cfg,
                                             std::uint64_t seed);

// Binary tensor file: "DSF1", u32 rows, u32 cols, row-major float32, all
// little-endian.
void write_tensor(const std::filesystem::path& path, const RowMatrix& m);
RowMatrix read_tensor(const std::filesystem::path& path);

// Directory layout: manifest.csv, mfcc/<segment_id>.bin, fau/<id>_<k>.bin.
void write_feature_store(const std::filesystem::path& dir, const std::vector<InterviewFeatures>& interviews);
std::vector<InterviewFeatures> read_feature_store(const std::filesystem::path& dir);

}  // namespace depscreen
