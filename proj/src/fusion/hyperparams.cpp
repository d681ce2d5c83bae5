// SPDX-License-Identifier: Apache-2.0
#include "fusion/hyperparams.hpp"

#include <algorithm>

#include "common/crypto.hpp"
#include "common/error.hpp"

namespace depscreen {

std::vector<int> FusionHyperparams::dense_widths() const {
  std::vector<int> w;
  int width = dense_top;
  for (int i = 0; i < n_dense; ++i) {
    w.push_back(std::max(1, width));
    width /= 2;
  }
  return w;
}

void FusionHyperparams::validate() const {
  for (int u : {bilstm1_units, bilstm2_units, bilstm3_units, fusion_bilstm_units, n_dense, dense_top, batch_size}) {
    if (u <= 0) fail(ErrorCode::kValidation, "hyperparameter widths and counts must be positive");
  }
  for (double d : {dropout1, dropout2, dropout3, fusion_dropout}) {
    if (!(d >= 0.0 && d < 1.0)) fail(ErrorCode::kValidation, "dropout rates must lie in [0, 1)");
  }
  if (!(learning_rate > 0.0)) fail(ErrorCode::kValidation, "learning_rate must be positive");
}

nlohmann::json FusionHyperparams::to_json() const {
  return {{"bilstm1_units", bilstm1_units},
          {"dropout1", dropout1},
          {"bilstm2_units", bilstm2_units},
          {"dropout2", dropout2},
          {"bilstm3_units", bilstm3_units},
          {"dropout3", dropout3},
          {"n_dense", n_dense},
          {"fusion_bilstm_units", fusion_bilstm_units},
          {"fusion_dropout", fusion_dropout},
          {"dense_top", dense_top},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size}};
}

FusionHyperparams FusionHyperparams::from_json(const nlohmann::json& j) {
  FusionHyperparams h;
  if (!j.is_object()) fail(ErrorCode::kValidation, "hyperparameters must be a JSON object");
  try {
    h.bilstm1_units = j.value("bilstm1_units", h.bilstm1_units);
    h.dropout1 = j.value("dropout1", h.dropout1);
    h.bilstm2_units = j.value("bilstm2_units", h.bilstm2_units);
    h.dropout2 = j.value("dropout2", h.dropout2);
    h.bilstm3_units = j.value("bilstm3_units", h.bilstm3_units);
    h.dropout3 = j.value("dropout3", h.dropout3);
    h.n_dense = j.value("n_dense", h.n_dense);
    h.fusion_bilstm_units = j.value("fusion_bilstm_units", h.fusion_bilstm_units);
    h.fusion_dropout = j.value("fusion_dropout", h.fusion_dropout);
    h.dense_top = j.value("dense_top", h.dense_top);
    h.learning_rate = j.value("learning_rate", h.learning_rate);
    h.batch_size = j.value("batch_size", h.batch_size);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kValidation, std::string("bad hyperparameter value: ") + e.what());
  }
  h.validate();
  return h;
}

std::string FusionHyperparams::hash() const { return sha256_hex(to_json().dump()).substr(0, 12); }

}  // namespace depscreen
