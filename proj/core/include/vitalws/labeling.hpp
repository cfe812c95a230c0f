#pragma once

// Labeling functions: clinician heuristics that vote real / artifact on an
// alert window, or abstain.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vitalws/alerts.hpp"
#include "vitalws/data_model.hpp"
#include "vitalws/dsp.hpp"

namespace vitalws {

enum class Vote : std::int8_t { kAbstain = -1, kReal = 0, kArtifact = 1 };

inline int vote_code(Vote v) noexcept { return static_cast<int>(v); }
/// Throws kMalformedRow for anything other than -1, 0, 1.
Vote vote_from_code(int code);

/// Everything an LF may look at for one window.
struct WindowContext {
  AlertWindow window;
  WindowView view;
  dsp::DerivedEstimates estimates;
};

WindowContext make_context(const PatientRecord& record, const AlertWindow& window,
                           const dsp::DspConfig& dsp = {});

struct LabelingFunction {
  std::string name;
  /// Must not throw; missing inputs mean ABSTAIN.
  std::function<Vote(const WindowContext&)> evaluate;
};

class VoteMatrix {
 public:
  VoteMatrix() = default;
  /// Throws kDuplicateName on repeated row or column ids.
  VoteMatrix(std::vector<std::string> row_ids, std::vector<std::string> lf_names,
             std::vector<Vote> votes);

  std::size_t rows() const noexcept { return row_ids_.size(); }
  std::size_t cols() const noexcept { return lf_names_.size(); }
  const std::vector<std::string>& row_ids() const noexcept { return row_ids_; }
  const std::vector<std::string>& lf_names() const noexcept { return lf_names_; }
  Vote at(std::size_t i, std::size_t j) const { return votes_[i * cols() + j]; }
  std::span<const Vote> row(std::size_t i) const {
    return {votes_.data() + i * cols(), cols()};
  }
  const std::vector<Vote>& data() const noexcept { return votes_; }

  /// Rows at the given positions, in that order.
  VoteMatrix select_rows(std::span<const std::size_t> rows) const;
  /// Columns at the given positions, in that order.
  VoteMatrix select_cols(std::span<const std::size_t> cols) const;

  bool operator==(const VoteMatrix&) const = default;

 private:
  std::vector<std::string> row_ids_;
  std::vector<std::string> lf_names_;
  std::vector<Vote> votes_;
};

/// Entry (i, j) = lfs[j].evaluate(windows[i]). Rows are filled in parallel.
VoteMatrix apply_labeling_functions(const std::vector<LabelingFunction>& lfs,
                                    const std::vector<WindowContext>& windows,
                                    std::size_t workers = 1);

struct LfStats {
  double coverage = 0.0;
  double overlap = 0.0;
  double conflict = 0.0;
};

std::vector<LfStats> lf_coverage_stats(const VoteMatrix& m);

/// Agreement bands, floors and ceilings used by the LF suites.
struct LfThresholds {
  double resp_extrema_band = 0.15;
  double resp_fft_band = 0.15;
  double resp_peak_band = 0.20;
  double pleth_rr_real_band = 0.25;
  double pleth_rr_artifact_band = 0.50;
  /// respHeight floor, in RESP units after preprocessing.
  double resp_height_floor = 0.05;
  double missing_density = 0.30;
  double numeric_density = 0.65;
  /// Standard deviation ceiling of the RR numeric, breaths/min.
  double rr_std_ceiling = 5.0;
  double hr_band = 0.10;
  /// Pulsatility floor, in PLETH units.
  double pulsatility_floor = 0.05;
  double tachypnea_rr = 20.0;
  /// Standard deviation ceiling of the SpO2 numeric, percent.
  double spo2_std_ceiling = 4.0;
  double consensus_agree_band = 0.10;
  double consensus_disagree_band = 0.25;
};

void to_json(nlohmann::json& j, const LfThresholds& t);
/// Missing keys keep their defaults; unknown keys throw kConfig.
void from_json(const nlohmann::json& j, LfThresholds& t);

/// |a - b| / b, with b the reference. A zero reference gives 0 when a is
/// also 0 and +inf otherwise.
double relative_difference(double a, double reference) noexcept;

std::vector<LabelingFunction> rr_lf_suite(const LfThresholds& t = {});
std::vector<LabelingFunction> spo2_lf_suite(const LfThresholds& t = {});
std::vector<LabelingFunction> lf_suite(AlertType tau, const LfThresholds& t = {});

/// Header `row_id,<lf names...>`, entries -1/0/1.
std::string vote_matrix_to_csv(const VoteMatrix& m);
VoteMatrix vote_matrix_from_csv(std::string_view text);

}  // namespace vitalws
