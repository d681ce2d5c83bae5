// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fusion/train.hpp"

namespace depscreen {

struct HyperbandConfig {
  int max_resource = 27;  // epochs
  int eta = 3;
  int iterations = 2;
  int patience = 3;
  int workers = 1;  // trials trained concurrently within a rung

  void validate() const;  // eta >= 2, max_resource >= eta
};

struct Rung {
  int n_configs = 0;
  int epochs = 0;
  bool operator==(const Rung&) const = default;
};

struct Bracket {
  int s = 0;
  std::vector<Rung> rungs;  // successive halving: keep floor(n / eta) per rung
};

std::vector<Bracket> hyperband_schedule(const HyperbandConfig& cfg);
int hyperband_s_max(const HyperbandConfig& cfg);

// Discrete search domain. Each axis lists its options; `base` supplies the
// fields no axis covers.
struct SearchSpace {
  std::vector<int> bilstm1_units{512, 256};
  std::vector<double> dropout1{0.1, 0.3, 0.5};
  std::vector<int> bilstm2_units{128, 256};
  std::vector<double> dropout2{0.1, 0.3, 0.5};
  std::vector<int> bilstm3_units{64, 128};
  std::vector<double> dropout3{0.1, 0.3, 0.5};
  std::vector<int> n_dense{4, 5, 6};
  std::vector<double> fusion_dropout;  // empty: base value only
  FusionHyperparams base;

  std::size_t size() const;
  // Mixed-radix decoding; axis order as declared above.
  FusionHyperparams at(std::size_t index) const;
  std::vector<FusionHyperparams> enumerate() const;
  static SearchSpace single(const FusionHyperparams& h);

  nlohmann::json to_json() const;
  static SearchSpace from_json(const nlohmann::json& j);
};

struct TrialRecord {
  int iteration = 0;
  int bracket = 0;
  int rung = 0;
  int trial = 0;  // index within the bracket's sampled configurations
  FusionHyperparams hyperparams;
  int epochs_allocated = 0;
  int epochs_run = 0;
  double val_loss = 0.0;
};

struct SearchResult {
  FusionHyperparams best;
  double best_val_loss = 0.0;
  std::vector<TrialRecord> trials;

  std::string trial_log_csv() const;
  // Epochs consumed per (iteration, bracket), in run order.
  std::vector<std::pair<std::pair<int, int>, long>> epochs_per_bracket() const;
};

// Runs cfg.iterations Hyperband passes; every trial trains a fresh model with
// the class-weighted loss and patience-based early stopping on `val`, and is
// scored by its best validation loss. Ties keep the earlier trial.
SearchResult hyperband_search(const SearchSpace& space, const SegmentSet& train_set, const SegmentSet& val_set,
                              const HyperbandConfig& cfg, std::uint64_t seed, int t_frames, int n_mfcc,
                              const std::function<void(const TrialRecord&)>& on_trial = {});

}  // namespace depscreen
