// SPDX-License-Identifier: Apache-2.0
#include "eval/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "common/error.hpp"

namespace depscreen {

void ConfusionMatrix::add(bool predicted_depressed, bool actually_depressed) {
  if (predicted_depressed) {
    (actually_depressed ? tp : fp) += 1;
  } else {
    (actually_depressed ? fn : tn) += 1;
  }
}

double Ratio::value() const {
  if (den == 0) fail(ErrorCode::kDegenerateDenominator, "metric is undefined (zero denominator)");
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string Ratio::percent() const {
  if (!defined()) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * value());
  return buf;
}

nlohmann::json Ratio::to_json() const { return defined() ? nlohmann::json(value()) : nlohmann::json(nullptr); }

nlohmann::json MetricSet::to_json() const {
  return {{"precision_d", precision_d.to_json()}, {"precision_nd", precision_nd.to_json()},
          {"recall_d", recall_d.to_json()},       {"recall_nd", recall_nd.to_json()},
          {"f1_d", f1_d.to_json()},               {"f1_nd", f1_nd.to_json()},
          {"accuracy", accuracy.to_json()}};
}

MetricSet compute_metrics(const ConfusionMatrix& m) {
  if (m.tp < 0 || m.fp < 0 || m.fn < 0 || m.tn < 0) fail(ErrorCode::kValidation, "negative confusion count");
  MetricSet s;
  s.precision_d = {m.tp, m.tp + m.fp};
  s.precision_nd = {m.tn, m.tn + m.fn};
  s.recall_d = {m.tp, m.tp + m.fn};
  s.recall_nd = {m.tn, m.tn + m.fp};
  // Harmonic mean of precision and recall, reduced to counts. Undefined when
  // either operand is.
  s.f1_d = s.precision_d.defined() && s.recall_d.defined() && m.tp > 0 ? Ratio{2 * m.tp, 2 * m.tp + m.fp + m.fn}
                                                                          : Ratio{0, 0};
  s.f1_nd = s.precision_nd.defined() && s.recall_nd.defined() && m.tn > 0 ? Ratio{2 * m.tn, 2 * m.tn + m.fp + m.fn}
                                                                             : Ratio{0, 0};
  s.accuracy = {m.tp + m.tn, m.total()};
  return s;
}

ReportedFigures published_losocv_figures() {
  return {"leave-one-subject-out", 80.00, 96.77, 92.86, 90.23, 85.95, 91.01};
}
ConfusionMatrix published_losocv_matrix() { return {52, 13, 4, 120}; }

// Non-depressed precision and recall are stored per their definitions; the
// published table lists them in transposed columns.
ReportedFigures published_avec_figures() { return {"train/validation/test split", 92.86, 81.82, 68.42, 96.43, 78.79, 85.11}; }
ConfusionMatrix published_avec_matrix() { return {16, 1, 3, 27}; }

namespace {

struct Check {
  const char* name;
  const std::optional<double>* reported;
  const Ratio* computed;
};

}  // namespace

std::vector<std::string> consistency_warnings(const ConfusionMatrix& m, const ReportedFigures& r, double tol) {
  const MetricSet s = compute_metrics(m);
  const Check checks[] = {{"precision_d", &r.precision_d, &s.precision_d}, {"precision_nd", &r.precision_nd, &s.precision_nd},
                          {"recall_d", &r.recall_d, &s.recall_d},          {"recall_nd", &r.recall_nd, &s.recall_nd},
                          {"f1_d", &r.f1_d, &s.f1_d},                      {"accuracy", &r.accuracy, &s.accuracy}};
  std::vector<std::string> out;
  for (const auto& c : checks) {
    if (!c.reported->has_value()) continue;
    const double want = **c.reported;
    if (!c.computed->defined()) {
      out.push_back(std::string(c.name) + ": reported " + std::to_string(want) + " but undefined for this matrix");
      continue;
    }
    const double got = 100.0 * c.computed->value();
    if (std::abs(std::round(got * 100.0) / 100.0 - want) > tol + 1e-9) {
      char buf[256];
      std::snprintf(buf, sizeof(buf), "%s (%s): matrix tp=%ld fp=%ld fn=%ld tn=%ld gives %.2f, reported %.2f",
                    c.name, r.label.c_str(), m.tp, m.fp, m.fn, m.tn, got, want);
      out.emplace_back(buf);
    }
  }
  return out;
}

std::vector<ConfusionMatrix> matrices_matching(const ReportedFigures& reported, long total, double tol) {
  std::vector<ConfusionMatrix> out;
  for (long tp = 0; tp <= total; ++tp) {
    for (long fp = 0; tp + fp <= total; ++fp) {
      for (long fn = 0; tp + fp + fn <= total; ++fn) {
        const ConfusionMatrix m{tp, fp, fn, total - tp - fp - fn};
        if (consistency_warnings(m, reported, tol).empty()) out.push_back(m);
      }
    }
  }
  return out;
}

}  // namespace depscreen
