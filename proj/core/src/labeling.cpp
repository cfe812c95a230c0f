#include "vitalws/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vitalws/error.hpp"
#include "vitalws/parallel.hpp"
#include "vitalws/stats.hpp"

namespace vitalws {

namespace {

using Opt = std::optional<double>;

std::vector<double> numeric_values(const WindowContext& ctx, ChannelId id) {
  const Channel* ch = ctx.view.find(id);
  return ch == nullptr ? std::vector<double>{} : ch->values();
}

Opt numeric_median(const WindowContext& ctx, ChannelId id) {
  const auto v = numeric_values(ctx, id);
  if (v.empty()) return std::nullopt;
  return stats::median(v);
}

Opt numeric_std(const WindowContext& ctx, ChannelId id) {
  const auto v = numeric_values(ctx, id);
  if (v.size() < 2) return std::nullopt;
  return stats::stddev(v);
}

Opt density_of(const WindowContext& ctx, ChannelId id) {
  if (!ctx.view.has(id)) return std::nullopt;
  return channel_density(ctx.view, id);
}

// REAL within `band`, ARTIFACT otherwise.
Vote agreement(Opt estimate, Opt reference, double band) {
  if (!estimate || !reference) return Vote::kAbstain;
  return relative_difference(*estimate, *reference) <= band ? Vote::kReal : Vote::kArtifact;
}

Opt first_of(Opt a, Opt b) { return a ? a : b; }

Opt spo2_std(const WindowContext& ctx) {
  const Opt a = numeric_std(ctx, ChannelId::kSpO2);
  const Opt b = numeric_std(ctx, ChannelId::kSpO2T);
  if (a && b) return std::max(*a, *b);
  return first_of(a, b);
}

Vote cross_hr_consensus(const WindowContext& ctx, const LfThresholds& t) {
  const auto& e = ctx.estimates;
  std::vector<double> sources;
  if (e.hr_ecg_ii && e.hr_ecg_iii) {
    sources.push_back(0.5 * (*e.hr_ecg_ii + *e.hr_ecg_iii));
  } else if (const Opt ecg = first_of(e.hr_ecg_ii, e.hr_ecg_iii)) {
    sources.push_back(*ecg);
  }
  if (e.pleth.hr_peaks) sources.push_back(*e.pleth.hr_peaks);
  if (e.pleth_t.hr_peaks) sources.push_back(*e.pleth_t.hr_peaks);
  if (sources.size() < 2) return Vote::kAbstain;

  bool any_agree = false;
  bool all_disagree = true;
  for (std::size_t a = 0; a < sources.size(); ++a) {
    for (std::size_t b = a + 1; b < sources.size(); ++b) {
      // Symmetric: measured against the larger of the pair.
      const double ref = std::max(sources[a], sources[b]);
      const double diff = relative_difference(std::min(sources[a], sources[b]), ref);
      any_agree = any_agree || diff <= t.consensus_agree_band;
      all_disagree = all_disagree && diff > t.consensus_disagree_band;
    }
  }
  if (any_agree) return Vote::kReal;
  if (all_disagree) return Vote::kArtifact;
  return Vote::kAbstain;
}

void check_unique(const std::vector<std::string>& ids, const char* what) {
  std::set<std::string_view> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw Error(ErrorCode::kDuplicateName, std::string("duplicate ") + what, id);
  }
}

}  // namespace

Vote vote_from_code(int code) {
  switch (code) {
    case -1: return Vote::kAbstain;
    case 0: return Vote::kReal;
    case 1: return Vote::kArtifact;
    default: throw Error(ErrorCode::kMalformedRow, "vote must be -1, 0 or 1", std::to_string(code));
  }
}

WindowContext make_context(const PatientRecord& record, const AlertWindow& window,
                           const dsp::DspConfig& dsp) {
  WindowContext ctx;
  ctx.window = window;
  ctx.view = slice_window(record, window.start, window.duration);
  ctx.estimates = dsp::compute_estimates(ctx.view, dsp);
  return ctx;
}

VoteMatrix::VoteMatrix(std::vector<std::string> row_ids, std::vector<std::string> lf_names,
                       std::vector<Vote> votes)
    : row_ids_(std::move(row_ids)), lf_names_(std::move(lf_names)), votes_(std::move(votes)) {
  if (votes_.size() != row_ids_.size() * lf_names_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "vote matrix is not rectangular");
  }
  check_unique(row_ids_, "row id");
  check_unique(lf_names_, "labeling function name");
}

VoteMatrix VoteMatrix::select_rows(std::span<const std::size_t> rows) const {
  std::vector<std::string> ids;
  std::vector<Vote> v;
  ids.reserve(rows.size());
  v.reserve(rows.size() * cols());
  for (const auto r : rows) {
    ids.push_back(row_ids_.at(r));
    const auto src = row(r);
    v.insert(v.end(), src.begin(), src.end());
  }
  return VoteMatrix(std::move(ids), lf_names_, std::move(v));
}

VoteMatrix VoteMatrix::select_cols(std::span<const std::size_t> sel) const {
  std::vector<std::string> names;
  for (const auto c : sel) names.push_back(lf_names_.at(c));
  std::vector<Vote> v;
  v.reserve(rows() * sel.size());
  for (std::size_t i = 0; i < rows(); ++i) {
    for (const auto c : sel) v.push_back(at(i, c));
  }
  return VoteMatrix(row_ids_, std::move(names), std::move(v));
}

VoteMatrix apply_labeling_functions(const std::vector<LabelingFunction>& lfs,
                                    const std::vector<WindowContext>& windows, std::size_t workers) {
  std::vector<std::string> names;
  names.reserve(lfs.size());
  for (const auto& lf : lfs) names.push_back(lf.name);
  check_unique(names, "labeling function name");

  std::vector<std::string> ids;
  ids.reserve(windows.size());
  for (const auto& w : windows) ids.push_back(w.window.row_id());

  const std::size_t m = lfs.size();
  std::vector<Vote> votes(windows.size() * m, Vote::kAbstain);
  parallel_for(windows.size(), workers, [&](std::size_t i) {
    for (std::size_t j = 0; j < m; ++j) votes[i * m + j] = lfs[j].evaluate(windows[i]);
  });
  return VoteMatrix(std::move(ids), std::move(names), std::move(votes));
}

std::vector<LfStats> lf_coverage_stats(const VoteMatrix& m) {
  std::vector<LfStats> out(m.cols());
  if (m.rows() == 0) return out;
  std::vector<std::size_t> cover(m.cols(), 0), overlap(m.cols(), 0), conflict(m.cols(), 0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row(i);
    std::size_t voters = 0;
    std::size_t real = 0;
    for (const Vote v : row) {
      voters += v != Vote::kAbstain;
      real += v == Vote::kReal;
    }
    const std::size_t artifact = voters - real;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] == Vote::kAbstain) continue;
      ++cover[j];
      if (voters > 1) ++overlap[j];
      const std::size_t opposing = row[j] == Vote::kReal ? artifact : real;
      if (opposing > 0) ++conflict[j];
    }
  }
  const auto n = static_cast<double>(m.rows());
  for (std::size_t j = 0; j < m.cols(); ++j) {
    out[j] = {static_cast<double>(cover[j]) / n, static_cast<double>(overlap[j]) / n,
              static_cast<double>(conflict[j]) / n};
  }
  return out;
}

double relative_difference(double a, double reference) noexcept {
  if (reference == 0.0) return a == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::abs(a - reference) / std::abs(reference);
}

std::vector<LabelingFunction> rr_lf_suite(const LfThresholds& t) {
  std::vector<LabelingFunction> s;
  s.push_back({"resp_extrema_agreement", [t](const WindowContext& c) {
                 return agreement(c.estimates.resp.extrema_rate, numeric_median(c, ChannelId::kRR),
                                  t.resp_extrema_band);
               }});
  s.push_back({"resp_fft_agreement", [t](const WindowContext& c) {
                 return agreement(c.estimates.resp.fft_rate, numeric_median(c, ChannelId::kRR), t.resp_fft_band);
               }});
  s.push_back({"resp_peakcount_agreement", [t](const WindowContext& c) {
                 return agreement(c.estimates.resp.peak_rate, numeric_median(c, ChannelId::kRR),
                                  t.resp_peak_band);
               }});
  s.push_back({"pleth_derived_rr_agreement", [t](const WindowContext& c) {
                 const Opt est = first_of(c.estimates.pleth.rr_extrema, c.estimates.pleth.rr_fft);
                 const Opt ref = numeric_median(c, ChannelId::kRR);
                 if (!est || !ref) return Vote::kAbstain;
                 const double diff = relative_difference(*est, *ref);
                 if (diff <= t.pleth_rr_real_band) return Vote::kReal;
                 if (diff > t.pleth_rr_artifact_band) return Vote::kArtifact;
                 return Vote::kAbstain;
               }});
  s.push_back({"resp_low_amplitude", [t](const WindowContext& c) {
                 const Opt h = c.estimates.resp.height;
                 return h && *h < t.resp_height_floor ? Vote::kArtifact : Vote::kAbstain;
               }});
  s.push_back({"resp_missing", [t](const WindowContext& c) {
                 const Opt d = density_of(c, ChannelId::kResp);
                 return d && *d < t.missing_density ? Vote::kArtifact : Vote::kAbstain;
               }});
  s.push_back({"rr_numeric_unstable", [t](const WindowContext& c) {
                 const Opt sd = numeric_std(c, ChannelId::kRR);
                 return sd && *sd > t.rr_std_ceiling ? Vote::kArtifact : Vote::kAbstain;
               }});
  s.push_back({"rr_numeric_density", [t](const WindowContext& c) {
                 const Opt d = density_of(c, ChannelId::kRR);
                 return d && *d < t.numeric_density ? Vote::kArtifact : Vote::kAbstain;
               }});
  return s;
}

std::vector<LabelingFunction> spo2_lf_suite(const LfThresholds& t) {
  std::vector<LabelingFunction> s;
  s.push_back({"hr_ecg2_vs_numeric", [t](const WindowContext& c) {
                 return agreement(c.estimates.hr_ecg_ii, numeric_median(c, ChannelId::kHR), t.hr_band);
               }});
  s.push_back({"hr_ecg3_vs_pleth", [t](const WindowContext& c) {
                 const Opt pleth = first_of(c.estimates.pleth.hr_peaks, c.estimates.pleth_t.hr_peaks);
                 return agreement(c.estimates.hr_ecg_iii, pleth, t.hr_band);
               }});
  s.push_back({"hr_plethpeaks_vs_numeric", [t](const WindowContext& c) {
                 return agreement(c.estimates.pleth.hr_peaks, numeric_median(c, ChannelId::kHR), t.hr_band);
               }});
  s.push_back({"hr_plethfft_vs_numeric", [t](const WindowContext& c) {
                 return agreement(c.estimates.pleth.hr_fft, numeric_median(c, ChannelId::kHR), t.hr_band);
               }});
  s.push_back({"hr_plethT_vs_numeric", [t](const WindowContext& c) {
                 return agreement(c.estimates.pleth_t.hr_peaks, numeric_median(c, ChannelId::kHR), t.hr_band);
               }});
  s.push_back({"pleth_low_pulsatility", [t](const WindowContext& c) {
                 const Opt p = c.estimates.pleth.pulsatility;
                 return p && *p < t.pulsatility_floor ? Vote::kArtifact : Vote::kAbstain;
               }});
  s.push_back({"plethT_low_pulsatility", [t](const WindowContext& c) {
                 const Opt p = c.estimates.pleth_t.pulsatility;
                 return p && *p < t.pulsatility_floor ? Vote::kArtifact : Vote::kAbstain;
               }});
  s.push_back({"tachypnea_support", [t](const WindowContext& c) {
                 const Opt rr = numeric_median(c, ChannelId::kRR);
                 return rr && *rr > t.tachypnea_rr ? Vote::kReal : Vote::kAbstain;
               }});
  s.push_back({"spo2_numeric_unstable", [t](const WindowContext& c) {
                 const Opt sd = spo2_std(c);
                 return sd && *sd > t.spo2_std_ceiling ? Vote::kArtifact : Vote::kAbstain;
               }});
  s.push_back({"pleth_missing", [t](const WindowContext& c) {
                 const Opt a = density_of(c, ChannelId::kPleth);
                 const Opt b = density_of(c, ChannelId::kPlethT);
                 if (!a && !b) return Vote::kAbstain;
                 const double best = std::max(a.value_or(0.0), b.value_or(0.0));
                 return best < t.missing_density ? Vote::kArtifact : Vote::kAbstain;
               }});
  s.push_back({"cross_hr_consensus", [t](const WindowContext& c) { return cross_hr_consensus(c, t); }});
  return s;
}

std::vector<LabelingFunction> lf_suite(AlertType tau, const LfThresholds& t) {
  return tau == AlertType::kRR ? rr_lf_suite(t) : spo2_lf_suite(t);
}

#define VITALWS_LF_FIELDS(X)                                                                      \
  X(resp_extrema_band) X(resp_fft_band) X(resp_peak_band) X(pleth_rr_real_band)                  \
  X(pleth_rr_artifact_band) X(resp_height_floor) X(missing_density) X(numeric_density)            \
  X(rr_std_ceiling) X(hr_band) X(pulsatility_floor) X(tachypnea_rr) X(spo2_std_ceiling)           \
  X(consensus_agree_band) X(consensus_disagree_band)

void to_json(nlohmann::json& j, const LfThresholds& t) {
  j = nlohmann::json::object();
#define X(f) j[#f] = t.f;
  VITALWS_LF_FIELDS(X)
#undef X
}

void from_json(const nlohmann::json& j, LfThresholds& t) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "lf thresholds must be an object");
  static const std::set<std::string> known = {
#define X(f) #f,
      VITALWS_LF_FIELDS(X)
#undef X
  };
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::kConfig, "unknown lf threshold", key);
    if (!value.is_number()) throw Error(ErrorCode::kConfig, "lf threshold must be a number", key);
  }
#define X(f) \
  if (j.contains(#f)) t.f = j.at(#f).get<double>();
  VITALWS_LF_FIELDS(X)
#undef X
}

#undef VITALWS_LF_FIELDS

std::string vote_matrix_to_csv(const VoteMatrix& m) {
  std::string out = "row_id";
  for (const auto& name : m.lf_names()) out += "," + name;
  out += '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out += m.row_ids()[i];
    for (const Vote v : m.row(i)) out += "," + std::to_string(vote_code(v));
    out += '\n';
  }
  return out;
}

VoteMatrix vote_matrix_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) parts.push_back(part);
    if (!s.empty() && s.back() == ',') parts.emplace_back();
    return parts;
  };
  if (!std::getline(in, line)) throw Error(ErrorCode::kMalformedRow, "empty vote matrix file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split(line);
  if (header.empty() || header[0] != "row_id") throw Error(ErrorCode::kMalformedRow, "vote matrix header must start with row_id");
  std::vector<std::string> names(header.begin() + 1, header.end());
  std::vector<std::string> ids;
  std::vector<Vote> votes;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kMalformedRow, "wrong number of cells", "line " + std::to_string(line_no));
    }
    ids.push_back(cells[0]);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      int code = 0;
      try {
        std::size_t used = 0;
        code = std::stoi(cells[c], &used);
        if (used != cells[c].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw Error(ErrorCode::kMalformedRow, "vote is not an integer", "line " + std::to_string(line_no));
      }
      votes.push_back(vote_from_code(code));
    }
  }
  return VoteMatrix(std::move(ids), std::move(names), std::move(votes));
}

}  // namespace vitalws
