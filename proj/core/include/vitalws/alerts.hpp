#pragma once

// Alert events from numeric channels and their 1-minute analysis windows.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vitalws/data_model.hpp"

namespace vitalws {

enum class AlertType { kRR, kSpO2 };

/// "RR" or "SPO2".
std::string_view alert_type_name(AlertType tau) noexcept;
/// Accepts either case.
std::optional<AlertType> parse_alert_type(std::string_view text) noexcept;

struct AlertCriteria {
  double min_duration_s = 300.0;
  double persistence = 0.70;
  double rr_low = 10.0;
  double rr_high = 29.0;
  double spo2_low = 90.0;
  double tolerance_s = 300.0;
  double density = 0.65;

  /// Throws kConfig when a field is out of range.
  void validate() const;
};

struct AlertEvent {
  std::string pid;
  std::string patient_id;
  AlertType tau = AlertType::kRR;
  double t = 0.0;  // seconds from record origin
  double d = 0.0;  // seconds
  bool telemetric = false;
  std::optional<int> y;

  bool operator==(const AlertEvent&) const = default;
};

inline constexpr int kWindowsPerEvent = 3;
inline constexpr double kWindowSeconds = 60.0;

struct AlertWindow {
  std::string parent;  // pid of the event
  std::string patient_id;
  AlertType tau = AlertType::kRR;
  int window_index = 0;
  double start = 0.0;
  double duration = kWindowSeconds;
  bool telemetric = false;
  std::optional<int> y;

  /// "<pid>-w<index>", the vote-matrix row id.
  std::string row_id() const;
  bool operator==(const AlertWindow&) const = default;
};

/// Whether a numeric value is beyond the alerting threshold for `tau`.
bool beyond_threshold(AlertType tau, double value, const AlertCriteria& criteria) noexcept;

/// Events sorted by start time. Beyond-threshold samples separated by less
/// than the tolerance are merged into one candidate spanning the first to the
/// last of them; candidates are kept when duration, persistence (over present
/// samples) and density all pass. For SpO2 both oximetry channels are scanned
/// and their events merged. Throws kMissingTriggerChannel.
std::vector<AlertEvent> detect_alert_events(const PatientRecord& record, AlertType tau,
                                            const AlertCriteria& criteria = {});

std::array<AlertWindow, kWindowsPerEvent> windows_from_event(const AlertEvent& event);
std::vector<AlertWindow> windows_from_events(const std::vector<AlertEvent>& events);

/// Sets `y` on every event whose pid has a label.
void attach_labels(std::vector<AlertEvent>& events, const std::vector<GroundTruthLabel>& labels);

void to_json(nlohmann::json& j, const AlertWindow& w);
void from_json(const nlohmann::json& j, AlertWindow& w);

/// One JSON object per line.
std::string windows_to_jsonl(const std::vector<AlertWindow>& windows);
std::vector<AlertWindow> windows_from_jsonl(std::string_view text);

}  // namespace vitalws
