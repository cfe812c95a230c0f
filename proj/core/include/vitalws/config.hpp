#pragma once

// Experiment configuration and the runners behind the command-line tool.
//
// A config is one JSON object. Every key is optional except the master seed,
// which may also come from the VITALWS_SEED environment variable. Unknown
// keys anywhere are rejected with kConfig so a typo never silently falls
// back to a default.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vitalws/alerts.hpp"
#include "vitalws/dsp.hpp"
#include "vitalws/evaluation.hpp"
#include "vitalws/features.hpp"
#include "vitalws/forest.hpp"
#include "vitalws/label_model.hpp"
#include "vitalws/labeling.hpp"
#include "vitalws/synth.hpp"

namespace vitalws {

void to_json(nlohmann::json& j, const AlertCriteria& c);
/// Missing keys keep their defaults; unknown keys throw kConfig.
void from_json(const nlohmann::json& j, AlertCriteria& c);

void to_json(nlohmann::json& j, const MissingnessPolicy& p);
void from_json(const nlohmann::json& j, MissingnessPolicy& p);

namespace dsp {
void to_json(nlohmann::json& j, const DspConfig& c);
void from_json(const nlohmann::json& j, DspConfig& c);
}  // namespace dsp

/// Cohort settings for in-memory generation when no data_dir is given.
/// `seed` absent means the master seed.
struct SynthSection {
  int patients = 40;
  double hours = 5.0;
  double artifact_rate = 0.26;
  std::vector<ArtifactKind> kinds = all_artifact_kinds();
  std::optional<std::uint64_t> seed;

  CohortSpec spec(std::uint64_t master_seed, std::size_t workers) const;
};

void to_json(nlohmann::json& j, const SynthSection& s);
void from_json(const nlohmann::json& j, SynthSection& s);

struct ExperimentConfig {
  /// Directory written by `synth` (manifests plus labels.csv). Empty means
  /// the cohort is generated in memory from `synth`.
  std::string data_dir;
  std::vector<AlertType> taus = {AlertType::kRR, AlertType::kSpO2};
  AlertCriteria criteria;
  dsp::DspConfig dsp;
  LfThresholds lf_thresholds;
  double class_balance = 0.26;
  LabelModelHyper label_model;
  ForestHyper forest;
  std::optional<std::uint64_t> seed;
  std::vector<ExperimentArm> arms = default_arms();
  std::string out_dir = "report";
  int pfi_repeats = 5;
  /// 0 = hardware concurrency. Outputs do not depend on it.
  std::size_t workers = 0;
  SynthSection synth;

  /// Throws kConfig, including when the seed is still unresolved.
  void validate() const;
  /// Fills `seed` from VITALWS_SEED when absent.
  void resolve_seed();
  DatasetOptions dataset_options() const;
  ExperimentOptions experiment_options() const;
};

/// "rr", "spo2" or "both".
std::vector<AlertType> parse_tau_list(const std::string& text);
std::string tau_list_name(const std::vector<AlertType>& taus);

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Throws kMissingFile or kConfig.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Sets a dotted key ("forest.trees") inside a config object. The value is
/// read as JSON when it parses, else as a string. Throws kConfig for a key
/// the default config does not have.
void apply_override(nlohmann::json& config, const std::string& dotted_key, const std::string& value);

/// Every leaf key of the default config with its default value, in key order.
std::vector<std::pair<std::string, std::string>> config_key_defaults();

struct LoadedCohort {
  std::vector<PatientRecord> records;
  std::vector<GroundTruthLabel> labels;
};

/// Manifests and labels.csv (labels optional) from a directory written by
/// write_cohort.
LoadedCohort load_cohort(const std::filesystem::path& dir);

/// Cohort named by the config: data_dir when set, else generated.
LoadedCohort config_cohort(const ExperimentConfig& config);

/// Full leave-one-patient-out run for every configured alert type. Writes
/// the report bundle plus `config.json` (the resolved config) to out_dir and
/// returns every written path.
std::vector<std::filesystem::path> run_evaluation(const ExperimentConfig& config);

struct TrainedModels {
  AlertType tau = AlertType::kRR;
  LabelModelParams label_model;
  MissingnessPolicy policy;
  TrainedForest forest;
  /// Windows used to fit the label model and the forest.
  std::size_t windows = 0;
  std::size_t forest_rows = 0;
};

/// Fits the label model on every window of `data` (labels unused) and a
/// forest on its crisp labels.
TrainedModels train_models(const Dataset& data, const ExperimentConfig& config);

/// Writes `<tau>_label_model.json`, `<tau>_missingness.json` and
/// `<tau>_forest.json`.
std::vector<std::filesystem::path> write_models(const TrainedModels& models, const std::filesystem::path& dir);

}  // namespace vitalws
