// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace depscreen {

// Depressed is the positive class.
struct ConfusionMatrix {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long tn = 0;

  long total() const { return tp + fp + fn + tn; }
  void add(bool predicted_depressed, bool actually_depressed);
  bool operator==(const ConfusionMatrix&) const = default;
};

// Exact num/den; value() throws DegenerateDenominator when den == 0.
struct Ratio {
  long num = 0;
  long den = 0;

  bool defined() const { return den != 0; }
  double value() const;
  // Percentage with two decimals, or "undefined".
  std::string percent() const;
  nlohmann::json to_json() const;  // number, or null when undefined
};

struct MetricSet {
  Ratio precision_d;
  Ratio precision_nd;
  Ratio recall_d;
  Ratio recall_nd;
  Ratio f1_d;
  Ratio f1_nd;
  Ratio accuracy;

  nlohmann::json to_json() const;
};

MetricSet compute_metrics(const ConfusionMatrix& m);

// Published percentages for one evaluation protocol; absent fields were not
// reported.
struct ReportedFigures {
  std::string label;
  std::optional<double> precision_d, precision_nd, recall_d, recall_nd, f1_d, accuracy;
};

// Leave-one-subject-out results and matrix as published.
ReportedFigures published_losocv_figures();
ConfusionMatrix published_losocv_matrix();
// Train/validation/test split results and the matrix published beside them.
ReportedFigures published_avec_figures();
ConfusionMatrix published_avec_matrix();

// One warning per reported figure that the matrix does not reproduce within
// tolerance (in percentage points).
std::vector<std::string> consistency_warnings(const ConfusionMatrix& m, const ReportedFigures& reported,
                                              double tolerance_points = 0.01);

// All matrices with the given total that reproduce every reported figure.
std::vector<ConfusionMatrix> matrices_matching(const ReportedFigures& reported, long total,
                                               double tolerance_points = 0.01);

}  // namespace depscreen
