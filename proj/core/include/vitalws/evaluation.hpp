#pragma once

// Leave-one-patient-out experiments over the labeling pipeline and the
// report bundle they produce.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vitalws/alerts.hpp"
#include "vitalws/dsp.hpp"
#include "vitalws/features.hpp"
#include "vitalws/forest.hpp"
#include "vitalws/label_model.hpp"
#include "vitalws/labeling.hpp"
#include "vitalws/metrics.hpp"

namespace vitalws {

enum class Labeler { kWeakSup, kFullySup, kMajorityVote, kProbLabels };
enum class Ablation { kWithWaveform, kWithoutWaveform };

struct ExperimentArm {
  Labeler labeler = Labeler::kWeakSup;
  Ablation ablation = Ablation::kWithWaveform;

  bool operator==(const ExperimentArm&) const = default;
};

/// WEAK_SUP, FULLY_SUP, MAJORITY_VOTE, PROB_LABELS.
std::string_view labeler_name(Labeler l) noexcept;
/// WITH_WAVEFORM, WITHOUT_WAVEFORM.
std::string_view ablation_name(Ablation a) noexcept;
std::optional<Labeler> parse_labeler(std::string_view text) noexcept;
std::optional<Ablation> parse_ablation(std::string_view text) noexcept;
/// Row label used in the metrics table, e.g. "Weak Sup." or "WS w/o WF".
std::string arm_display_name(const ExperimentArm& arm);
/// Three labelers with and without waveform features, plus PROB_LABELS.
std::vector<ExperimentArm> default_arms();
/// "WEAK_SUP/WITH_WAVEFORM"; parse throws kConfig.
std::string arm_key(const ExperimentArm& arm);
ExperimentArm parse_arm_key(std::string_view key);

/// Windows of one alert type with their votes and features. Row i of `votes`
/// and `features[i]` belong to `windows[i]`.
struct Dataset {
  AlertType tau = AlertType::kRR;
  std::vector<AlertWindow> windows;
  VoteMatrix votes;
  std::vector<FeatureVector> features;
  /// Windows skipped because their event has no ground-truth label.
  std::size_t unlabeled_windows = 0;
};

struct DatasetOptions {
  AlertCriteria criteria;
  dsp::DspConfig dsp;
  LfThresholds thresholds;
  std::size_t workers = 0;
  /// Keep windows without a ground-truth label (y stays empty). Off for
  /// experiments, on when only votes or a label model are needed.
  bool keep_unlabeled = false;
};

/// Detects events per record, windows them, attaches labels and computes
/// votes and features. Errors from a record carry its patient id.
Dataset build_dataset(const std::vector<PatientRecord>& records, const std::vector<GroundTruthLabel>& labels,
                      AlertType tau, const DatasetOptions& options = {});

struct Fold {
  std::string patient_id;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// One fold per patient, ordered by patient id. Throws kTooFewPatients.
std::vector<Fold> lopo_folds(const std::vector<AlertWindow>& windows);

struct ExperimentOptions {
  double class_balance = 0.26;
  LabelModelHyper label_model;
  ForestHyper forest;
  std::vector<ExperimentArm> arms = default_arms();
  int pfi_repeats = 5;
  std::uint64_t seed = 0;
  /// Folds run in parallel; 0 = hardware concurrency.
  std::size_t workers = 0;

  /// Throws kConfig.
  void validate() const;
};

struct FoldResult {
  std::string patient_id;
  std::size_t windows = 0;
  std::size_t artifacts = 0;
  double accuracy = 0.0;
  std::optional<double> auc;  // absent when the patient has one class

  bool operator==(const FoldResult&) const = default;
};

struct ArmResult {
  ExperimentArm arm;
  /// Pooled out-of-fold artifact probabilities, aligned with the report rows.
  std::vector<double> scores;
  Metrics metrics;
  std::vector<FoldResult> folds;
  /// False for PROB_LABELS, which scores with the label model directly.
  bool end_model = true;
  /// Fold-averaged importances of the end model (empty without one).
  std::vector<ImportanceEntry> gini;
  std::vector<ImportanceEntry> permutation;

  bool operator==(const ArmResult&) const = default;
};

struct EvaluationReport {
  AlertType tau = AlertType::kRR;
  std::vector<std::string> row_ids;
  std::vector<std::string> patient_ids;
  std::vector<int> labels;
  std::vector<ArmResult> arms;

  bool operator==(const EvaluationReport&) const = default;
};

/// Every model and policy is fit on the training windows of each fold only;
/// test windows contribute just their features (and votes, for PROB_LABELS).
EvaluationReport run_experiment(const Dataset& data, const ExperimentOptions& options);

/// Lower-case alert type used in file names: "rr" or "spo2".
std::string tau_file_token(AlertType tau);

/// Writes `{tau}_report.json`, the metrics table, per-fold metrics, ROC point
/// CSVs in both orientations with SVG plots, scores and importance rankings.
/// Returns the files written. Throws kIo.
std::vector<std::filesystem::path> emit_report(const EvaluationReport& report, const std::filesystem::path& out_dir);

/// Reads a `{tau}_report.json`. Throws kIo or kSchemaMismatch.
EvaluationReport load_report(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const EvaluationReport& r);
void from_json(const nlohmann::json& j, EvaluationReport& r);

}  // namespace vitalws
