#include "vitalws/alerts.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vitalws/error.hpp"

namespace vitalws {

namespace {

constexpr double kRatioSlack = 1e-12;

struct Interval {
  double t = 0.0;
  double end = 0.0;
  bool telemetric = false;
};

std::vector<Interval> scan_channel(const Channel& channel, AlertType tau, const AlertCriteria& c,
                                   bool telemetric) {
  std::vector<std::int64_t> present;
  std::vector<std::int64_t> beyond;
  present.reserve(channel.sample_count());
  for (const auto& seg : channel.segments()) {
    for (std::size_t k = 0; k < seg.values.size(); ++k) {
      const std::int64_t idx = seg.start + static_cast<std::int64_t>(k);
      present.push_back(idx);
      if (beyond_threshold(tau, seg.values[k], c)) beyond.push_back(idx);
    }
  }

  const double fs = channel.fs();
  std::vector<Interval> out;
  std::size_t i = 0;
  while (i < beyond.size()) {
    std::size_t j = i;
    // Merge while the stretch without beyond-threshold samples is shorter
    // than the tolerance.
    while (j + 1 < beyond.size() &&
           static_cast<double>(beyond[j + 1] - beyond[j] - 1) / fs < c.tolerance_s) {
      ++j;
    }
    const std::int64_t first = beyond[i];
    const std::int64_t last = beyond[j];
    const auto span_samples = static_cast<double>(last - first + 1);
    const auto n_beyond = static_cast<double>(j - i + 1);
    const auto n_present = static_cast<double>(
        std::upper_bound(present.begin(), present.end(), last) -
        std::lower_bound(present.begin(), present.end(), first));

    const bool long_enough = span_samples / fs >= c.min_duration_s - 1e-9;
    const bool persistent = n_beyond / n_present >= c.persistence - kRatioSlack;
    const bool dense = n_present / span_samples >= c.density - kRatioSlack;
    if (long_enough && persistent && dense) {
      out.push_back({static_cast<double>(first) / fs, static_cast<double>(last + 1) / fs, telemetric});
    }
    i = j + 1;
  }
  return out;
}

}  // namespace

std::string_view alert_type_name(AlertType tau) noexcept {
  return tau == AlertType::kRR ? "RR" : "SPO2";
}

std::optional<AlertType> parse_alert_type(std::string_view text) noexcept {
  std::string upper(text);
  for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  if (upper == "RR") return AlertType::kRR;
  if (upper == "SPO2") return AlertType::kSpO2;
  return std::nullopt;
}

void AlertCriteria::validate() const {
  auto fraction = [](double v) { return v > 0.0 && v <= 1.0; };
  if (!(min_duration_s > 0.0)) throw Error(ErrorCode::kConfig, "min_duration must be positive");
  if (!(tolerance_s >= 0.0)) throw Error(ErrorCode::kConfig, "tolerance must be non-negative");
  if (!fraction(persistence)) throw Error(ErrorCode::kConfig, "persistence must lie in (0, 1]");
  if (!fraction(density)) throw Error(ErrorCode::kConfig, "density must lie in (0, 1]");
  if (!(rr_low < rr_high)) throw Error(ErrorCode::kConfig, "rr_low must be below rr_high");
  // A 60 s window split needs three whole windows inside every event.
  if (min_duration_s < kWindowsPerEvent * kWindowSeconds) {
    throw Error(ErrorCode::kConfig, "min_duration shorter than the three analysis windows");
  }
}

bool beyond_threshold(AlertType tau, double value, const AlertCriteria& c) noexcept {
  if (tau == AlertType::kRR) return value < c.rr_low || value > c.rr_high;
  return value < c.spo2_low;
}

std::vector<AlertEvent> detect_alert_events(const PatientRecord& record, AlertType tau,
                                            const AlertCriteria& criteria) {
  std::vector<Interval> found;
  if (tau == AlertType::kRR) {
    const Channel* rr = record.find(ChannelId::kRR);
    if (rr == nullptr) {
      throw Error(ErrorCode::kMissingTriggerChannel, "missing trigger channel RR", record.patient_id);
    }
    found = scan_channel(*rr, tau, criteria, false);
  } else {
    const Channel* spo2 = record.find(ChannelId::kSpO2);
    const Channel* spo2_t = record.find(ChannelId::kSpO2T);
    if (spo2 == nullptr && spo2_t == nullptr) {
      throw Error(ErrorCode::kMissingTriggerChannel, "missing trigger channel SPO2/SPO2_T",
                  record.patient_id);
    }
    if (spo2 != nullptr) found = scan_channel(*spo2, tau, criteria, false);
    if (spo2_t != nullptr) {
      const auto more = scan_channel(*spo2_t, tau, criteria, true);
      found.insert(found.end(), more.begin(), more.end());
    }
  }

  std::sort(found.begin(), found.end(), [](const Interval& a, const Interval& b) {
    return a.t != b.t ? a.t < b.t : a.end < b.end;
  });
  std::vector<Interval> merged;
  for (const auto& iv : found) {
    if (!merged.empty() && iv.t - merged.back().end < criteria.tolerance_s) {
      auto& back = merged.back();
      back.end = std::max(back.end, iv.end);
      back.telemetric = back.telemetric || iv.telemetric;
    } else {
      merged.push_back(iv);
    }
  }

  std::vector<AlertEvent> events;
  events.reserve(merged.size());
  for (std::size_t k = 0; k < merged.size(); ++k) {
    AlertEvent e;
    e.patient_id = record.patient_id;
    e.tau = tau;
    e.pid = record.patient_id + "-" + std::string(alert_type_name(tau)) + "-" + std::to_string(k);
    e.t = merged[k].t;
    e.d = merged[k].end - merged[k].t;
    e.telemetric = merged[k].telemetric;
    events.push_back(std::move(e));
  }
  return events;
}

std::string AlertWindow::row_id() const { return parent + "-w" + std::to_string(window_index); }

std::array<AlertWindow, kWindowsPerEvent> windows_from_event(const AlertEvent& event) {
  std::array<AlertWindow, kWindowsPerEvent> out;
  for (int i = 0; i < kWindowsPerEvent; ++i) {
    auto& w = out[static_cast<std::size_t>(i)];
    w.parent = event.pid;
    w.patient_id = event.patient_id;
    w.tau = event.tau;
    w.window_index = i;
    w.start = event.t + kWindowSeconds * i;
    w.duration = kWindowSeconds;
    w.telemetric = event.telemetric;
    w.y = event.y;
  }
  return out;
}

std::vector<AlertWindow> windows_from_events(const std::vector<AlertEvent>& events) {
  std::vector<AlertWindow> out;
  out.reserve(events.size() * kWindowsPerEvent);
  for (const auto& e : events) {
    const auto ws = windows_from_event(e);
    out.insert(out.end(), ws.begin(), ws.end());
  }
  return out;
}

void attach_labels(std::vector<AlertEvent>& events, const std::vector<GroundTruthLabel>& labels) {
  std::map<std::string, int> by_id;
  for (const auto& l : labels) by_id[l.event_id] = l.y;
  for (auto& e : events) {
    if (const auto it = by_id.find(e.pid); it != by_id.end()) e.y = it->second;
  }
}

void to_json(nlohmann::json& j, const AlertWindow& w) {
  j = nlohmann::json{{"pid", w.parent},
                     {"patient_id", w.patient_id},
                     {"tau", alert_type_name(w.tau)},
                     {"window_index", w.window_index},
                     {"start", w.start},
                     {"duration", w.duration},
                     {"telemetric", w.telemetric}};
  if (w.y) j["y"] = *w.y;
}

void from_json(const nlohmann::json& j, AlertWindow& w) {
  try {
    w.parent = j.at("pid").get<std::string>();
    w.patient_id = j.at("patient_id").get<std::string>();
    const auto tau = parse_alert_type(j.at("tau").get<std::string>());
    if (!tau) throw Error(ErrorCode::kMalformedRow, "unknown alert type", w.parent);
    w.tau = *tau;
    w.window_index = j.at("window_index").get<int>();
    w.start = j.at("start").get<double>();
    w.duration = j.at("duration").get<double>();
    w.telemetric = j.at("telemetric").get<bool>();
    w.y.reset();
    if (j.contains("y")) w.y = j.at("y").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedRow, std::string("bad alert window: ") + e.what());
  }
}

std::string windows_to_jsonl(const std::vector<AlertWindow>& windows) {
  std::string out;
  for (const auto& w : windows) {
    out += nlohmann::json(w).dump();
    out += '\n';
  }
  return out;
}

std::vector<AlertWindow> windows_from_jsonl(std::string_view text) {
  std::vector<AlertWindow> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformedRow, std::string("bad JSON line: ") + e.what());
    }
    out.push_back(j.get<AlertWindow>());
  }
  return out;
}

}  // namespace vitalws
