// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace depscreen {

struct FusionHyperparams {
  int bilstm1_units = 256;
  double dropout1 = 0.5;
  int bilstm2_units = 128;
  double dropout2 = 0.3;
  int bilstm3_units = 64;
  double dropout3 = 0.5;
  int n_dense = 4;
  int fusion_bilstm_units = 64;
  double fusion_dropout = 0.3;
  // Width of the first dense layer; each following layer halves it
  // (256 -> 128, 64, 32, 16, 8).
  int dense_top = 256;
  double learning_rate = 1e-3;
  int batch_size = 32;

  std::vector<int> dense_widths() const;
  // Throws Validation on non-positive widths or rates outside [0, 1).
  void validate() const;

  nlohmann::json to_json() const;
  // Missing keys keep their defaults.
  static FusionHyperparams from_json(const nlohmann::json& j);
  // Short stable identifier of the configuration.
  std::string hash() const;

  bool operator==(const FusionHyperparams&) const = default;
};

}  // namespace depscreen
