// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <vector>

#include "corpus/synth.hpp"
#include "eval/protocols.hpp"
#include "fusion/hyperparams.hpp"

namespace depscreen::testing {

// Small synthetic corpus: n interviews alternating labels (odd index
// depressed), ~17 s of patient speech each (2 segments), text verdict equal
// to the label.
inline EvalCorpus small_eval_corpus(int n, bool augment, std::uint64_t seed = 5) {
  std::vector<InterviewFeatures> features;
  std::map<int, int> verdicts;
  FeatureConfig cfg;
  cfg.augmentation = augment;
  for (int i = 0; i < n; ++i) {
    const int id = 1000 + i;
    const Interview iv = synth_interview(id, i % 2 == 1, seed, 17.0);
    features.push_back(extract_interview_features(iv, cfg, seed));
    verdicts[id] = i % 2;
  }
  EvalCorpus c;
  c.interviews = std::move(features);
  c.llm_verdicts = verdicts;
  return c;
}

inline FusionHyperparams tiny_net() {
  FusionHyperparams h;
  h.bilstm1_units = h.bilstm2_units = h.bilstm3_units = h.fusion_bilstm_units = 4;
  h.dense_top = 16;
  h.n_dense = 4;
  h.batch_size = 16;
  return h;
}

}  // namespace depscreen::testing
