#include "vitalws/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "vitalws/error.hpp"
#include "vitalws/stats.hpp"

namespace vitalws {

namespace {

constexpr std::string_view kAggregatePrefixes[] = {"mean_", "std_", "kurt_", "skew_", "med_", "q1_", "q3_"};

void put(FeatureVector& f, const std::string& name, std::optional<double> v) {
  if (v && std::isfinite(*v)) f[name] = *v;
}

void put_aggregates(FeatureVector& f, const Channel& ch) {
  const auto v = ch.values();
  if (v.empty()) return;
  const std::string stem(feature_stem(ch.id()));
  f["mean_" + stem] = stats::mean(v);
  f["std_" + stem] = stats::stddev(v);
  f["med_" + stem] = stats::median(v);
  f["q1_" + stem] = stats::quantile(v, 0.25);
  f["q3_" + stem] = stats::quantile(v, 0.75);
  put(f, "skew_" + stem, stats::skewness(v));
  put(f, "kurt_" + stem, stats::excess_kurtosis(v));
}

void put_pleth(FeatureVector& f, const dsp::PlethEstimates& e, const std::string& prefix,
               const std::string& pulsatility_name) {
  put(f, prefix + "FFT", e.hr_fft);
  put(f, prefix + "INT", e.hr_peaks);
  put(f, prefix + "NK1", e.rr_extrema);
  put(f, prefix + "RR", e.rr_fft);
  put(f, prefix + "Height", e.envelope_height);
  put(f, pulsatility_name, e.pulsatility);
}

}  // namespace

bool channel_excluded(AlertType tau, ChannelId id) noexcept {
  if (id == ChannelId::kArt) return true;
  if (tau == AlertType::kRR) {
    return id == ChannelId::kPlethT || id == ChannelId::kEcgIII || id == ChannelId::kSpO2T;
  }
  return false;
}

bool is_numeric_aggregate(std::string_view feature) noexcept {
  for (const auto prefix : kAggregatePrefixes) {
    if (!feature.starts_with(prefix)) continue;
    const auto stem = feature.substr(prefix.size());
    for (const auto id : kAllChannels) {
      if (channel_kind(id) == ChannelKind::kNumeric && stem == feature_stem(id)) return true;
    }
  }
  return false;
}

FeatureVector extract_features(const WindowContext& ctx, AlertType tau) {
  FeatureVector f;
  for (const auto& [id, ch] : ctx.view.channels()) {
    if (!channel_excluded(tau, id)) put_aggregates(f, ch);
  }
  const auto& e = ctx.estimates;
  put(f, "respFFT", e.resp.fft_rate);
  put(f, "respNK1", e.resp.extrema_rate);
  put(f, "respPeaks", e.resp.peak_rate);
  put(f, "respHeight", e.resp.height);
  put_pleth(f, e.pleth, "pleth", "pulsatility");
  put(f, "hrECG2", e.hr_ecg_ii);
  if (!channel_excluded(tau, ChannelId::kPlethT)) put_pleth(f, e.pleth_t, "plethT", "pulsatilityT");
  if (!channel_excluded(tau, ChannelId::kEcgIII)) put(f, "hrECG3", e.hr_ecg_iii);
  return f;
}

MissingnessPolicy fit_missingness_policy(const std::vector<FeatureVector>& train, double max_missing_fraction) {
  if (train.empty()) throw Error(ErrorCode::kEmptyInput, "missingness policy needs training rows");
  struct Seen {
    std::size_t count = 0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
  };
  std::map<std::string, Seen> seen;
  for (const auto& row : train) {
    for (const auto& [name, v] : row) {
      auto& s = seen[name];
      ++s.count;
      s.lo = std::min(s.lo, v);
      s.hi = std::max(s.hi, v);
    }
  }
  MissingnessPolicy p;
  const auto n = static_cast<double>(train.size());
  for (const auto& [name, s] : seen) {
    const auto missing = static_cast<double>(train.size() - s.count);
    if (missing > max_missing_fraction * n) {
      p.dropped.insert(name);
      continue;
    }
    p.features.push_back(name);
    p.impute[name] = s.lo <= 0.0 && 0.0 <= s.hi ? -1.0 : 0.0;
  }
  return p;
}

FeatureMatrix apply_missingness_policy(const MissingnessPolicy& policy, const std::vector<FeatureVector>& rows) {
  FeatureMatrix m;
  m.names = policy.features;
  m.rows = rows.size();
  m.values.reserve(rows.size() * m.names.size());
  for (const auto& row : rows) {
    for (const auto& name : m.names) {
      const auto it = row.find(name);
      m.values.push_back(it != row.end() ? it->second : policy.impute.at(name));
    }
  }
  return m;
}

std::string feature_matrix_to_csv(const FeatureMatrix& m, const std::vector<std::string>& row_ids) {
  if (row_ids.size() != m.rows) throw Error(ErrorCode::kInvalidArgument, "row id count differs from matrix rows");
  std::string out = "row_id";
  for (const auto& n : m.names) out += "," + n;
  out += '\n';
  for (std::size_t i = 0; i < m.rows; ++i) {
    out += row_ids[i];
    for (std::size_t j = 0; j < m.cols(); ++j) out += "," + format_double(m.at(i, j));
    out += '\n';
  }
  return out;
}

}  // namespace vitalws
