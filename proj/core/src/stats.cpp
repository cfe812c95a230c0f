#include "vitalws/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/statistics/univariate_statistics.hpp>

#include "vitalws/error.hpp"

namespace vitalws::stats {

namespace {

void require_nonempty(std::span<const double> x) {
  if (x.empty()) throw Error(ErrorCode::kEmptyInput, "statistic of an empty sample");
}

}  // namespace

double mean(std::span<const double> x) {
  require_nonempty(x);
  return boost::math::statistics::mean(x.begin(), x.end());
}

double stddev(std::span<const double> x) {
  require_nonempty(x);
  return std::sqrt(boost::math::statistics::variance(x.begin(), x.end()));
}

double median(std::span<const double> x) {
  require_nonempty(x);
  std::vector<double> v(x.begin(), x.end());
  return boost::math::statistics::median(v.begin(), v.end());
}

double quantile(std::span<const double> x, double q) {
  require_nonempty(x);
  std::vector<double> v(x.begin(), x.end());
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + (v[hi] - v[lo]) * frac;
}

std::optional<double> skewness(std::span<const double> x) {
  require_nonempty(x);
  if (boost::math::statistics::variance(x.begin(), x.end()) <= 0.0) return std::nullopt;
  const double s = boost::math::statistics::skewness(x.begin(), x.end());
  return std::isfinite(s) ? std::optional<double>(s) : std::nullopt;
}

std::optional<double> excess_kurtosis(std::span<const double> x) {
  require_nonempty(x);
  if (boost::math::statistics::variance(x.begin(), x.end()) <= 0.0) return std::nullopt;
  const double k = boost::math::statistics::excess_kurtosis(x.begin(), x.end());
  return std::isfinite(k) ? std::optional<double>(k) : std::nullopt;
}

}  // namespace vitalws::stats
