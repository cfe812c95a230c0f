#pragma once

// Deterministic synthetic cohort with planted real and artifact alerts.
//
// Each patient record is split into half-hour slots holding one planted alert
// each. Numerics cover the whole record; waveforms exist only around the
// three analysis windows of each alert, which keeps a 40-patient cohort in
// the hundreds of megabytes instead of gigabytes.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vitalws/alerts.hpp"
#include "vitalws/data_model.hpp"

namespace vitalws {

enum class ArtifactKind { kFlatline, kNoiseBurst, kSensorDropout, kNumericWaveformMismatch };

/// FLATLINE, NOISE_BURST, SENSOR_DROPOUT, NUMERIC_WAVEFORM_MISMATCH.
std::string_view artifact_kind_name(ArtifactKind k) noexcept;
std::optional<ArtifactKind> parse_artifact_kind(std::string_view text) noexcept;
std::vector<ArtifactKind> all_artifact_kinds();

inline constexpr double kSlotSeconds = 1800.0;

struct CohortSpec {
  int n_patients = 40;
  /// Rounded down to whole half-hour slots, one alert per slot.
  double hours_per_patient = 5.0;
  double artifact_rate = 0.26;
  std::uint64_t seed = 0;
  std::vector<ArtifactKind> artifact_kinds = all_artifact_kinds();
  /// Patients are generated in parallel; 0 = hardware concurrency.
  std::size_t workers = 0;

  /// Throws kConfig.
  void validate() const;
  int slots_per_patient() const;
};

struct PlantedEvent {
  std::string patient_id;
  AlertType tau = AlertType::kRR;
  /// Span of the numeric excursion, seconds.
  double start = 0.0;
  double end = 0.0;
  int y = 0;
  std::optional<ArtifactKind> kind;
  /// pid of the detected event covering this plant, empty when none does.
  std::string event_id;
};

struct SynthPatient {
  PatientRecord record;
  std::vector<PlantedEvent> plants;
  /// One label per detected event that overlaps a plant.
  std::vector<GroundTruthLabel> labels;
};

/// "P000", "P001", ...
std::string synth_patient_id(int index);

/// Patient `index` of the cohort; independent of every other patient.
SynthPatient generate_patient(const CohortSpec& spec, int index);

struct Cohort {
  std::vector<PatientRecord> records;
  std::vector<GroundTruthLabel> labels;
  std::vector<PlantedEvent> plants;
};

Cohort generate_cohort(const CohortSpec& spec);

/// Corrupts [start_s, end_s) of `record` for an alert of type `tau`.
/// Waveform kinds act on RESP (RR) or on the oximetry pleth (SpO2); the
/// mismatch kind rescales RR (RR) or HR (SpO2) so waveform rates disagree
/// with the numeric. Throws kInvalidArgument when the interval is empty or
/// outside the record.
PatientRecord inject_artifact(PatientRecord record, AlertType tau, double start_s, double end_s,
                              ArtifactKind kind, std::uint64_t seed);

/// Writes `<dir>/<patient_id>/manifest.json` per record, `<dir>/labels.csv`
/// and `<dir>/plants.csv`. Returns the manifest paths.
std::vector<std::filesystem::path> write_cohort(const Cohort& cohort, const std::filesystem::path& dir);

/// Manifest paths under `dir`, sorted by directory name.
std::vector<std::filesystem::path> find_manifests(const std::filesystem::path& dir);

}  // namespace vitalws
