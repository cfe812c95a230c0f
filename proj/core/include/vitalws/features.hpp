#pragma once

// Window featurisation and the train-fold missingness policy.

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vitalws/alerts.hpp"
#include "vitalws/labeling.hpp"

namespace vitalws {

/// Named values; a missing name means the feature could not be computed.
using FeatureVector = std::map<std::string, double>;

/// Aggregates (mean_, std_, kurt_, skew_, med_, q1_, q3_ per raw channel) and
/// waveform-derived rates and amplitudes.
FeatureVector extract_features(const WindowContext& ctx, AlertType tau);

/// Channels whose features are never used for `tau`.
bool channel_excluded(AlertType tau, ChannelId id) noexcept;

/// True for aggregates of numeric channels (rr, hr, SpO2, SpO2T); everything
/// else is derived from waveforms.
bool is_numeric_aggregate(std::string_view feature) noexcept;

/// Dense row-major matrix with named columns.
struct FeatureMatrix {
  std::vector<std::string> names;
  std::size_t rows = 0;
  std::vector<double> values;

  std::size_t cols() const noexcept { return names.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * cols() + j]; }
  /// Columns whose names satisfy `keep`, in order.
  template <class Pred>
  FeatureMatrix select_columns(Pred keep) const {
    FeatureMatrix out;
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < cols(); ++j) {
      if (keep(names[j])) {
        idx.push_back(j);
        out.names.push_back(names[j]);
      }
    }
    out.rows = rows;
    out.values.reserve(rows * idx.size());
    for (std::size_t i = 0; i < rows; ++i) {
      for (const auto j : idx) out.values.push_back(at(i, j));
    }
    return out;
  }
  bool operator==(const FeatureMatrix&) const = default;
};

struct MissingnessPolicy {
  /// Kept features, in column order.
  std::vector<std::string> features;
  std::set<std::string> dropped;
  /// Fill value for each kept feature: -1 when 0 lies inside the observed
  /// training range, else 0.
  std::map<std::string, double> impute;
};

/// Fits on training rows only. Throws kEmptyInput for no rows.
MissingnessPolicy fit_missingness_policy(const std::vector<FeatureVector>& train,
                                         double max_missing_fraction = 0.75);

FeatureMatrix apply_missingness_policy(const MissingnessPolicy& policy,
                                       const std::vector<FeatureVector>& rows);

/// CSV with header `row_id,<names...>`.
std::string feature_matrix_to_csv(const FeatureMatrix& m, const std::vector<std::string>& row_ids);

}  // namespace vitalws
