#pragma once

// Brute-force references for ROC metrics and the Wilson interval.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "vitalws/metrics.hpp"

namespace vitalws::testing {

struct Instance {
  std::vector<double> s;
  std::vector<int> y;
};

inline Instance random_instance(std::mt19937_64& rng) {
  Instance in;
  const std::size_t n = 2 + rng() % 199;
  const bool coarse = rng() % 2 == 0;  // coarse scores force ties
  for (std::size_t i = 0; i < n; ++i) {
    in.y.push_back(static_cast<int>(rng() % 2));
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    in.s.push_back(coarse ? std::floor(u * 8) / 8 + 0.1 * in.y.back() : u);
  }
  in.y[0] = 0;
  in.y[1] = 1;
  return in;
}

// Exhaustive reference: every distinct score as a threshold, integer rate tests.
struct Brute {
  double auc;
  OperatingPoints op;
};

inline Brute brute_force(const Instance& in) {
  std::size_t P = 0, N = 0;
  for (const int v : in.y) (v ? P : N) += 1;
  std::uint64_t gt = 0, eq = 0;
  for (std::size_t i = 0; i < in.s.size(); ++i) {
    for (std::size_t k = 0; k < in.s.size(); ++k) {
      if (in.y[i] != 1 || in.y[k] != 0) continue;
      if (in.s[i] > in.s[k]) ++gt;
      if (in.s[i] == in.s[k]) ++eq;
    }
  }
  Brute b;
  b.auc = static_cast<double>(2 * gt + eq) / (2.0 * static_cast<double>(P) * static_cast<double>(N));
  std::set<double> thresholds(in.s.begin(), in.s.end());
  thresholds.insert(INFINITY);
  for (const double t : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < in.s.size(); ++i) {
      if (in.s[i] >= t) (in.y[i] ? tp : fp) += 1;
    }
    const std::size_t tn = N - fp, fn = P - tp;
    if (2 * tp >= P) b.op.fpr_at_50tpr = std::min(b.op.fpr_at_50tpr, static_cast<double>(fp) / static_cast<double>(N));
    if (2 * tn >= N) b.op.fnr_at_50tnr = std::min(b.op.fnr_at_50tnr, static_cast<double>(fn) / static_cast<double>(P));
    if (100 * fp <= N) b.op.tpr_at_1fpr = std::max(b.op.tpr_at_1fpr, static_cast<double>(tp) / static_cast<double>(P));
    if (100 * fn <= P) b.op.tnr_at_1fnr = std::max(b.op.tnr_at_1fnr, static_cast<double>(tn) / static_cast<double>(N));
  }
  return b;
}

inline double wilson_direct(double k, double n, double z) {
  const double p = k / n;
  return (p + z * z / (2 * n) - z * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n))) / (1 + z * z / n);
}

}  // namespace vitalws::testing
