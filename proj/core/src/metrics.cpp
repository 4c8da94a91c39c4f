#include "pixelreg/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace pixelreg::metrics {

namespace {

void require_paired(const std::vector<double>& scores, const std::vector<std::uint8_t>& truth) {
  if (scores.size() != truth.size())
    throw std::invalid_argument("metrics: scores and truth differ in length");
  if (scores.empty()) throw std::invalid_argument("metrics: empty input");
}

std::pair<long long, long long> class_counts(const std::vector<std::uint8_t>& truth) {
  long long pos = 0;
  for (auto t : truth) pos += t ? 1 : 0;
  return {pos, static_cast<long long>(truth.size()) - pos};
}

}  // namespace

ConfusionCounts confusion_at_threshold(const std::vector<double>& scores,
                                       const std::vector<std::uint8_t>& truth, double threshold) {
  require_paired(scores, truth);
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (truth[i]) {
      (pred ? c.tp : c.fn)++;
    } else {
      (pred ? c.fp : c.tn)++;
    }
  }
  return c;
}

SnSpAcc sn_sp_acc(const ConfusionCounts& c) {
  if (c.total() <= 0) throw std::invalid_argument("sn_sp_acc: empty counts");
  SnSpAcc m;
  m.sn = (c.tp + c.fn) ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 1.0;
  m.sp = (c.tn + c.fp) ? static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp) : 1.0;
  m.acc = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  return m;
}

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<std::uint8_t>& truth) {
  require_paired(scores, truth);
  auto [pos, neg] = class_counts(truth);
  if (pos == 0 || neg == 0) throw std::invalid_argument("roc_curve: single-class truth");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  long long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (truth[order[i]] ? tp : fp)++;
      ++i;
    }
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos)});
  }
  return curve;
}

double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return area;
}

double auc_pairwise_oracle(const std::vector<double>& scores,
                           const std::vector<std::uint8_t>& truth) {
  require_paired(scores, truth);
  if (scores.size() > 10000) throw std::invalid_argument("auc_pairwise_oracle: n > 1e4");
  auto [pos, neg] = class_counts(truth);
  if (pos == 0 || neg == 0) throw std::invalid_argument("auc_pairwise_oracle: single-class truth");

  double acc = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!truth[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (truth[j]) continue;
      if (scores[i] > scores[j])
        acc += 1.0;
      else if (scores[i] == scores[j])
        acc += 0.5;
    }
  }
  return acc / (static_cast<double>(pos) * static_cast<double>(neg));
}

MetricsReport compute_metrics(const std::vector<double>& scores,
                              const std::vector<std::uint8_t>& truth, double threshold) {
  MetricsReport r;
  r.threshold = threshold;
  auto m = sn_sp_acc(confusion_at_threshold(scores, truth, threshold));
  r.sn = m.sn;
  r.sp = m.sp;
  r.acc = m.acc;
  r.roc = roc_curve(scores, truth);
  r.auc = auc(r.roc);
  return r;
}

void write_roc_csv(std::ostream& os, const RocCurve& curve) {
  os << "fpr,tpr\n";
  char line[80];
  for (const auto& p : curve.points) {
    std::snprintf(line, sizeof line, "%.9g,%.9g\n", p.fpr, p.tpr);
    os << line;
  }
}

}  // namespace pixelreg::metrics
