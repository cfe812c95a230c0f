#pragma once

// ROC curves, AUC, fixed-rate operating points and Wilson intervals.
// Positive class = artifact (label 1); a window is flagged when its score
// is >= the threshold.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace vitalws {

struct RocPoint {
  double threshold = 0.0;  // +inf for the all-negative point
  std::size_t tp = 0;
  std::size_t fp = 0;

  bool operator==(const RocPoint&) const = default;
};

struct Roc {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  /// From (0, 0) at +inf down to (1, 1) at the lowest score.
  std::vector<RocPoint> points;
  double auc = 0.0;

  double tpr(std::size_t k) const { return static_cast<double>(points[k].tp) / static_cast<double>(positives); }
  double fpr(std::size_t k) const { return static_cast<double>(points[k].fp) / static_cast<double>(negatives); }
  double fnr(std::size_t k) const {
    return static_cast<double>(positives - points[k].tp) / static_cast<double>(positives);
  }
  double tnr(std::size_t k) const {
    return static_cast<double>(negatives - points[k].fp) / static_cast<double>(negatives);
  }
};

/// One point per distinct score. Throws kSingleClass unless both labels occur,
/// kInvalidArgument on size mismatch or non-finite scores.
Roc roc_and_auc(std::span<const double> scores, std::span<const int> labels);

struct RatePoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double fnr = 0.0;
  double tnr = 0.0;
};

struct OperatingPoints {
  double fpr_at_50tpr = 1.0;
  double fnr_at_50tnr = 1.0;
  double tpr_at_1fpr = 0.0;
  double tnr_at_1fnr = 0.0;

  bool operator==(const OperatingPoints&) const = default;
};

/// Best rate at each fixed level, read off existing points only.
OperatingPoints operating_point_metrics(const Roc& roc);
/// Same for a bare curve of (fpr, tpr) pairs; fnr = 1 - tpr, tnr = 1 - fpr.
OperatingPoints operating_point_metrics(std::span<const std::pair<double, double>> fpr_tpr);

/// Wilson score interval for `successes` out of `n`. Throws kInvalidArgument
/// for n = 0 or successes > n.
std::pair<double, double> wilson_interval(std::size_t successes, std::size_t n, double z = 1.96);

struct Metrics {
  double accuracy = 0.0;
  double auc = 0.0;
  OperatingPoints op;

  bool operator==(const Metrics&) const = default;
};

/// Accuracy flags a window when score > 0.5.
Metrics compute_metrics(std::span<const double> scores, std::span<const int> labels);

}  // namespace vitalws
