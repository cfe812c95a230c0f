#pragma once

// Multi-rate physiological recordings.
//
// Time is sample index at the channel's own rate. A channel stores its
// samples as runs of consecutive indices; anything between runs is missing.
// Window boundaries are half-open.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vitalws {

enum class ChannelId { kEcgII, kEcgIII, kPleth, kPlethT, kArt, kResp, kRR, kHR, kSpO2, kSpO2T };
enum class ChannelKind { kWaveform, kNumeric };

inline constexpr std::array<ChannelId, 10> kAllChannels = {
    ChannelId::kEcgII, ChannelId::kEcgIII, ChannelId::kPleth, ChannelId::kPlethT, ChannelId::kArt,
    ChannelId::kResp,  ChannelId::kRR,     ChannelId::kHR,    ChannelId::kSpO2,   ChannelId::kSpO2T};

/// Manifest id, e.g. "ECG_II", "SPO2_T".
std::string_view channel_name(ChannelId id) noexcept;
std::optional<ChannelId> parse_channel(std::string_view name) noexcept;
/// Short stem used in feature names: "ecg2", "plethT", "rr", "SpO2T", ...
std::string_view feature_stem(ChannelId id) noexcept;
ChannelKind channel_kind(ChannelId id) noexcept;
/// Whether `fs` is an admissible sampling rate for this channel.
bool fs_allowed(ChannelId id, double fs) noexcept;

/// A run of samples at consecutive indices starting at `start`.
struct Segment {
  std::int64_t start = 0;
  std::vector<double> values;

  std::int64_t end() const noexcept { return start + static_cast<std::int64_t>(values.size()); }
  bool operator==(const Segment&) const = default;
};

class Channel {
 public:
  Channel() = default;
  /// Segments must be non-empty, sorted and non-overlapping; adjacent runs
  /// are coalesced.
  Channel(ChannelId id, ChannelKind kind, double fs, std::vector<Segment> segments);

  /// Builds a channel from explicit (index, value) pairs. Indices must be
  /// strictly increasing.
  static Channel from_samples(ChannelId id, ChannelKind kind, double fs,
                              std::span<const std::int64_t> indices,
                              std::span<const double> values);

  ChannelId id() const noexcept { return id_; }
  ChannelKind kind() const noexcept { return kind_; }
  double fs() const noexcept { return fs_; }
  const std::vector<Segment>& segments() const noexcept { return segments_; }

  std::size_t sample_count() const noexcept;
  bool empty() const noexcept { return segments_.empty(); }

  /// Samples with index in [begin, end).
  Channel slice(std::int64_t begin, std::int64_t end) const;

  /// All present values in index order, gaps dropped.
  std::vector<double> values() const;
  /// Values of the longest gap-free run (first one on ties).
  std::vector<double> longest_run() const;

  bool operator==(const Channel&) const = default;

 private:
  ChannelId id_ = ChannelId::kRR;
  ChannelKind kind_ = ChannelKind::kNumeric;
  double fs_ = 1.0;
  std::vector<Segment> segments_;
};

struct PatientRecord {
  std::string patient_id;
  std::map<ChannelId, Channel> channels;

  bool has(ChannelId id) const { return channels.contains(id); }
  const Channel* find(ChannelId id) const;
  /// True when the record carries a telemetric oximetry channel.
  bool telemetric() const { return has(ChannelId::kPlethT) || has(ChannelId::kSpO2T); }
};

/// 0 = real, 1 = artifact.
struct GroundTruthLabel {
  std::string event_id;
  int y = 0;

  bool operator==(const GroundTruthLabel&) const = default;
};

/// Per-channel views of a record over [start, start + duration) seconds.
/// Channels present in the record are always present here, possibly empty.
class WindowView {
 public:
  WindowView() = default;
  WindowView(double start, double duration, std::map<ChannelId, Channel> channels)
      : start_(start), duration_(duration), channels_(std::move(channels)) {}

  double start() const noexcept { return start_; }
  double duration() const noexcept { return duration_; }
  const std::map<ChannelId, Channel>& channels() const noexcept { return channels_; }
  bool has(ChannelId id) const { return channels_.contains(id); }
  const Channel* find(ChannelId id) const;
  /// Throws kUnknownChannel when the record never had this channel.
  const Channel& at(ChannelId id) const;

 private:
  double start_ = 0.0;
  double duration_ = 0.0;
  std::map<ChannelId, Channel> channels_;
};

/// First sample index at or after time `t` seconds.
std::int64_t index_at(double t, double fs) noexcept;

WindowView slice_window(const PatientRecord& record, double start, double duration);
/// Slices an existing view; the result covers the intersection of both intervals.
WindowView slice_window(const WindowView& view, double start, double duration);

/// Present samples over expected samples (fs * duration), clamped to [0, 1].
double channel_density(const WindowView& view, ChannelId channel);

// File layout: one CSV per channel with header `index,value`, plus a JSON
// manifest {"patient_id", "channels": [{"id", "file", "fs", "kind"}]}.

PatientRecord load_patient_record(const std::filesystem::path& manifest_path);
/// Writes `<dir>/manifest.json` and one CSV per channel; returns the manifest path.
std::filesystem::path write_patient_record(const PatientRecord& record,
                                           const std::filesystem::path& dir);

std::vector<GroundTruthLabel> load_labels(const std::filesystem::path& path);
void write_labels(const std::vector<GroundTruthLabel>& labels, const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace vitalws
