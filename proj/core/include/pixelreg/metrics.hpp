#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace pixelreg::metrics {

struct ConfusionCounts {
  long long tp = 0, fp = 0, tn = 0, fn = 0;
  long long total() const { return tp + fp + tn + fn; }
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// Points run from (0,0) to (1,1) with both coordinates non-decreasing.
struct RocCurve {
  std::vector<RocPoint> points;
};

struct SnSpAcc {
  double sn = 0.0, sp = 0.0, acc = 0.0;
};

struct MetricsReport {
  double sn = 0.0, sp = 0.0, acc = 0.0, auc = 0.0;
  RocCurve roc;
  double threshold = 0.5;
};

// score >= threshold counts as predicted positive.
ConfusionCounts confusion_at_threshold(const std::vector<double>& scores,
                                       const std::vector<std::uint8_t>& truth, double threshold);

// sn and sp fall back to 1 when their denominator is empty.
SnSpAcc sn_sp_acc(const ConfusionCounts& c);

// Threshold sweep over distinct scores, descending, ties grouped into one step.
RocCurve roc_curve(const std::vector<double>& scores, const std::vector<std::uint8_t>& truth);

// Trapezoidal area over fpr.
double auc(const RocCurve& curve);

// Exhaustive Mann-Whitney statistic with the half-tie convention. Quadratic,
// capped at n = 10^4.
double auc_pairwise_oracle(const std::vector<double>& scores,
                           const std::vector<std::uint8_t>& truth);

MetricsReport compute_metrics(const std::vector<double>& scores,
                              const std::vector<std::uint8_t>& truth, double threshold = 0.5);

// Header "fpr,tpr", one point per row, 9 significant digits.
void write_roc_csv(std::ostream& os, const RocCurve& curve);

}  // namespace pixelreg::metrics
