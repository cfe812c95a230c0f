#include "vitalws/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "vitalws/error.hpp"

namespace vitalws {

namespace {

OperatingPoints best_rates(std::span<const RatePoint> pts) {
  OperatingPoints op;
  for (const auto& p : pts) {
    if (p.tpr >= 0.5) op.fpr_at_50tpr = std::min(op.fpr_at_50tpr, p.fpr);
    if (p.tnr >= 0.5) op.fnr_at_50tnr = std::min(op.fnr_at_50tnr, p.fnr);
    if (p.fpr <= 0.01) op.tpr_at_1fpr = std::max(op.tpr_at_1fpr, p.tpr);
    if (p.fnr <= 0.01) op.tnr_at_1fnr = std::max(op.tnr_at_1fnr, p.tnr);
  }
  return op;
}

}  // namespace

Roc roc_and_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::kInvalidArgument, "scores and labels differ in length");
  Roc roc;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw Error(ErrorCode::kInvalidArgument, "non-finite score");
    if (labels[i] != 0 && labels[i] != 1) throw Error(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
    (labels[i] == 1 ? roc.positives : roc.negatives) += 1;
  }
  if (roc.positives == 0 || roc.negatives == 0) throw Error(ErrorCode::kSingleClass, "ROC needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  roc.points.push_back({std::numeric_limits<double>::infinity(), 0, 0});
  std::size_t tp = 0, fp = 0;
  // Twice the trapezoid area in units of one (positive, negative) pair.
  std::uint64_t twice_area = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (labels[order[k]] == 1 ? tp : fp) += 1;
    if (k + 1 < order.size() && scores[order[k + 1]] == scores[order[k]]) continue;
    const auto& prev = roc.points.back();
    twice_area += static_cast<std::uint64_t>(fp - prev.fp) * (tp + prev.tp);
    roc.points.push_back({scores[order[k]], tp, fp});
  }
  roc.auc = static_cast<double>(twice_area) / (2.0 * static_cast<double>(roc.positives) * static_cast<double>(roc.negatives));
  return roc;
}

OperatingPoints operating_point_metrics(const Roc& roc) {
  std::vector<RatePoint> pts;
  pts.reserve(roc.points.size());
  for (std::size_t k = 0; k < roc.points.size(); ++k) pts.push_back({roc.fpr(k), roc.tpr(k), roc.fnr(k), roc.tnr(k)});
  return best_rates(pts);
}

OperatingPoints operating_point_metrics(std::span<const std::pair<double, double>> fpr_tpr) {
  std::vector<RatePoint> pts;
  for (const auto& [f, t] : fpr_tpr) pts.push_back({f, t, 1.0 - t, 1.0 - f});
  return best_rates(pts);
}

std::pair<double, double> wilson_interval(std::size_t successes, std::size_t n, double z) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "Wilson interval needs n > 0");
  if (successes > n) throw Error(ErrorCode::kInvalidArgument, "successes exceed n");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  const double lo = successes == 0 ? 0.0 : std::max(0.0, center - half);
  const double hi = successes == n ? 1.0 : std::min(1.0, center + half);
  return {lo, hi};
}

Metrics compute_metrics(std::span<const double> scores, std::span<const int> labels) {
  const auto roc = roc_and_auc(scores, labels);
  Metrics m;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) hit += (scores[i] > 0.5 ? 1 : 0) == labels[i];
  m.accuracy = static_cast<double>(hit) / static_cast<double>(scores.size());
  m.auc = roc.auc;
  m.op = operating_point_metrics(roc);
  return m;
}

}  // namespace vitalws
