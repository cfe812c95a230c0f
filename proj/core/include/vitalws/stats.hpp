#pragma once

#include <optional>
#include <span>

namespace vitalws::stats {

double mean(std::span<const double> x);
/// Population standard deviation.
double stddev(std::span<const double> x);
/// Median; midpoint of the two middle values for even sizes.
double median(std::span<const double> x);
/// Linear-interpolated quantile (q in [0, 1]) on the sorted sample.
double quantile(std::span<const double> x, double q);
/// Sample skewness (biased, population moments); absent for zero variance.
std::optional<double> skewness(std::span<const double> x);
/// Excess kurtosis (Fisher, biased); absent for zero variance.
std::optional<double> excess_kurtosis(std::span<const double> x);

}  // namespace vitalws::stats
