#include "vitalws/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vitalws/error.hpp"

namespace vitalws {

namespace {

struct ChannelInfo {
  ChannelId id;
  std::string_view name;
  std::string_view stem;
  ChannelKind kind;
};

constexpr std::array<ChannelInfo, 10> kChannelTable = {{
    {ChannelId::kEcgII, "ECG_II", "ecg2", ChannelKind::kWaveform},
    {ChannelId::kEcgIII, "ECG_III", "ecg3", ChannelKind::kWaveform},
    {ChannelId::kPleth, "PLETH", "pleth", ChannelKind::kWaveform},
    {ChannelId::kPlethT, "PLETH_T", "plethT", ChannelKind::kWaveform},
    {ChannelId::kArt, "ART", "art", ChannelKind::kWaveform},
    {ChannelId::kResp, "RESP", "resp", ChannelKind::kWaveform},
    {ChannelId::kRR, "RR", "rr", ChannelKind::kNumeric},
    {ChannelId::kHR, "HR", "hr", ChannelKind::kNumeric},
    {ChannelId::kSpO2, "SPO2", "SpO2", ChannelKind::kNumeric},
    {ChannelId::kSpO2T, "SPO2_T", "SpO2T", ChannelKind::kNumeric},
}};

const ChannelInfo& info(ChannelId id) {
  return kChannelTable[static_cast<std::size_t>(id)];
}

void coalesce(std::vector<Segment>& segments) {
  std::vector<Segment> out;
  out.reserve(segments.size());
  for (auto& s : segments) {
    if (s.values.empty()) continue;
    if (!out.empty() && out.back().end() == s.start) {
      auto& back = out.back().values;
      back.insert(back.end(), s.values.begin(), s.values.end());
    } else {
      out.push_back(std::move(s));
    }
  }
  segments = std::move(out);
}

}  // namespace

std::string_view channel_name(ChannelId id) noexcept { return info(id).name; }

std::optional<ChannelId> parse_channel(std::string_view name) noexcept {
  for (const auto& c : kChannelTable) {
    if (c.name == name) return c.id;
  }
  return std::nullopt;
}

std::string_view feature_stem(ChannelId id) noexcept { return info(id).stem; }

ChannelKind channel_kind(ChannelId id) noexcept { return info(id).kind; }

bool fs_allowed(ChannelId id, double fs) noexcept {
  switch (id) {
    case ChannelId::kEcgII:
    case ChannelId::kEcgIII:
      return fs == 250.0 || fs == 500.0;
    case ChannelId::kPleth:
    case ChannelId::kPlethT:
    case ChannelId::kArt:
      return fs == 125.0;
    case ChannelId::kResp:
      return fs == 62.5;
    case ChannelId::kRR:
    case ChannelId::kHR:
    case ChannelId::kSpO2:
    case ChannelId::kSpO2T:
      return fs == 1.0;
  }
  return false;
}

// ---------------------------------------------------------------------------

Channel::Channel(ChannelId id, ChannelKind kind, double fs, std::vector<Segment> segments)
    : id_(id), kind_(kind), fs_(fs), segments_(std::move(segments)) {
  if (!(fs_ > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "sampling rate must be positive",
                std::string(channel_name(id)));
  }
  for (std::size_t i = 1; i < segments_.size(); ++i) {
    if (segments_[i].start < segments_[i - 1].end()) {
      throw Error(ErrorCode::kMalformedRow, "sample indices not strictly increasing",
                  std::string(channel_name(id)));
    }
  }
  coalesce(segments_);
}

Channel Channel::from_samples(ChannelId id, ChannelKind kind, double fs,
                              std::span<const std::int64_t> indices,
                              std::span<const double> values) {
  if (indices.size() != values.size()) {
    throw Error(ErrorCode::kInvalidArgument, "index/value length mismatch",
                std::string(channel_name(id)));
  }
  std::vector<Segment> segments;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (i > 0 && indices[i] <= indices[i - 1]) {
      throw Error(ErrorCode::kMalformedRow, "sample indices not strictly increasing",
                  std::string(channel_name(id)));
    }
    if (segments.empty() || segments.back().end() != indices[i]) {
      segments.push_back(Segment{indices[i], {}});
    }
    segments.back().values.push_back(values[i]);
  }
  return Channel(id, kind, fs, std::move(segments));
}

std::size_t Channel::sample_count() const noexcept {
  std::size_t n = 0;
  for (const auto& s : segments_) n += s.values.size();
  return n;
}

Channel Channel::slice(std::int64_t begin, std::int64_t end) const {
  std::vector<Segment> out;
  auto it = std::upper_bound(segments_.begin(), segments_.end(), begin,
                             [](std::int64_t b, const Segment& s) { return b < s.end(); });
  for (; it != segments_.end() && it->start < end; ++it) {
    const std::int64_t lo = std::max(begin, it->start);
    const std::int64_t hi = std::min(end, it->end());
    if (lo >= hi) continue;
    Segment seg{lo, {}};
    seg.values.assign(it->values.begin() + (lo - it->start), it->values.begin() + (hi - it->start));
    out.push_back(std::move(seg));
  }
  Channel c;
  c.id_ = id_;
  c.kind_ = kind_;
  c.fs_ = fs_;
  c.segments_ = std::move(out);
  return c;
}

std::vector<double> Channel::values() const {
  std::vector<double> out;
  out.reserve(sample_count());
  for (const auto& s : segments_) out.insert(out.end(), s.values.begin(), s.values.end());
  return out;
}

std::vector<double> Channel::longest_run() const {
  const Segment* best = nullptr;
  for (const auto& s : segments_) {
    if (best == nullptr || s.values.size() > best->values.size()) best = &s;
  }
  return best ? best->values : std::vector<double>{};
}

const Channel* PatientRecord::find(ChannelId id) const {
  auto it = channels.find(id);
  return it == channels.end() ? nullptr : &it->second;
}

const Channel* WindowView::find(ChannelId id) const {
  auto it = channels_.find(id);
  return it == channels_.end() ? nullptr : &it->second;
}

const Channel& WindowView::at(ChannelId id) const {
  const Channel* c = find(id);
  if (c == nullptr) {
    throw Error(ErrorCode::kUnknownChannel, "channel not present in view",
                std::string(channel_name(id)));
  }
  return *c;
}

std::int64_t index_at(double t, double fs) noexcept {
  return static_cast<std::int64_t>(std::ceil(t * fs - 1e-9));
}

namespace {

std::map<ChannelId, Channel> slice_channels(const std::map<ChannelId, Channel>& channels,
                                            double start, double duration) {
  std::map<ChannelId, Channel> out;
  for (const auto& [id, ch] : channels) {
    out.emplace(id, ch.slice(index_at(start, ch.fs()), index_at(start + duration, ch.fs())));
  }
  return out;
}

}  // namespace

WindowView slice_window(const PatientRecord& record, double start, double duration) {
  if (!(duration > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "window duration must be positive");
  }
  return WindowView(start, duration, slice_channels(record.channels, start, duration));
}

WindowView slice_window(const WindowView& view, double start, double duration) {
  if (!(duration > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "window duration must be positive");
  }
  const double lo = std::max(start, view.start());
  const double hi = std::min(start + duration, view.start() + view.duration());
  const double d = std::max(0.0, hi - lo);
  if (d == 0.0) {
    std::map<ChannelId, Channel> empty;
    for (const auto& [id, ch] : view.channels()) empty.emplace(id, ch.slice(0, 0));
    return WindowView(lo, 0.0, std::move(empty));
  }
  return WindowView(lo, d, slice_channels(view.channels(), lo, d));
}

double channel_density(const WindowView& view, ChannelId channel) {
  const Channel& ch = view.at(channel);
  const double expected = ch.fs() * view.duration();
  if (expected <= 0.0) return 0.0;
  return std::clamp(static_cast<double>(ch.sample_count()) / expected, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Files

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

Channel read_channel_csv(const std::filesystem::path& path, ChannelId id, ChannelKind kind,
                         double fs) {
  const std::string name(channel_name(id));
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open " + path.string(), name);
  std::vector<Segment> segments;
  std::string line;
  std::size_t line_no = 0;
  std::int64_t prev = 0;
  bool have_prev = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view row = trim(line);
    if (row.empty()) continue;
    if (line_no == 1 && row == "index,value") continue;
    const auto comma = row.find(',');
    std::int64_t index = 0;
    double value = 0.0;
    if (comma == std::string_view::npos || !parse_number(row.substr(0, comma), index) ||
        !parse_number(row.substr(comma + 1), value)) {
      throw Error(ErrorCode::kMalformedRow,
                  "malformed row " + std::to_string(line_no) + " in " + path.string(), name);
    }
    if (have_prev && index <= prev) {
      throw Error(ErrorCode::kMalformedRow,
                  "non-increasing index at row " + std::to_string(line_no) + " in " + path.string(),
                  name);
    }
    if (segments.empty() || segments.back().end() != index) segments.push_back(Segment{index, {}});
    segments.back().values.push_back(value);
    prev = index;
    have_prev = true;
  }
  return Channel(id, kind, fs, std::move(segments));
}

}  // namespace

PatientRecord load_patient_record(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBadManifest, std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!manifest.is_object() || !manifest.contains("patient_id") ||
      !manifest["patient_id"].is_string() || !manifest.contains("channels") ||
      !manifest["channels"].is_array()) {
    throw Error(ErrorCode::kBadManifest, "manifest needs patient_id and channels");
  }
  PatientRecord record;
  record.patient_id = manifest["patient_id"].get<std::string>();
  if (record.patient_id.empty()) throw Error(ErrorCode::kBadManifest, "empty patient_id");

  const auto base = manifest_path.parent_path();
  for (const auto& entry : manifest["channels"]) {
    if (!entry.is_object() || !entry.contains("id") || !entry["id"].is_string() ||
        !entry.contains("file") || !entry["file"].is_string() || !entry.contains("fs") ||
        !entry["fs"].is_number()) {
      throw Error(ErrorCode::kBadManifest, "channel entry needs id, file and fs");
    }
    const auto id_text = entry["id"].get<std::string>();
    const auto id = parse_channel(id_text);
    if (!id) throw Error(ErrorCode::kUnknownChannel, "unknown channel id", id_text);
    const double fs = entry["fs"].get<double>();
    if (!fs_allowed(*id, fs)) {
      throw Error(ErrorCode::kFsMismatch, "fs mismatch: " + format_double(fs) + " Hz", id_text);
    }
    ChannelKind kind = channel_kind(*id);
    if (entry.contains("kind")) {
      const auto k = entry["kind"].get<std::string>();
      const ChannelKind declared = k == "waveform" ? ChannelKind::kWaveform
                                   : k == "numeric" ? ChannelKind::kNumeric
                                                    : throw Error(ErrorCode::kBadManifest,
                                                                  "kind must be waveform|numeric",
                                                                  id_text);
      if (declared != kind) throw Error(ErrorCode::kBadManifest, "kind mismatch", id_text);
    }
    if (record.channels.contains(*id)) {
      throw Error(ErrorCode::kDuplicateChannel, "duplicate channel", id_text);
    }
    record.channels.emplace(*id, read_channel_csv(base / entry["file"].get<std::string>(), *id,
                                                  kind, fs));
  }
  return record;
}

std::filesystem::path write_patient_record(const PatientRecord& record,
                                           const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json manifest;
  manifest["patient_id"] = record.patient_id;
  manifest["channels"] = nlohmann::json::array();
  for (const auto& [id, ch] : record.channels) {
    const std::string file = std::string(channel_name(id)) + ".csv";
    std::ofstream out(dir / file);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + (dir / file).string());
    out << "index,value\n";
    std::string buf;
    for (const auto& seg : ch.segments()) {
      for (std::size_t i = 0; i < seg.values.size(); ++i) {
        buf.clear();
        buf += std::to_string(seg.start + static_cast<std::int64_t>(i));
        buf += ',';
        buf += format_double(seg.values[i]);
        buf += '\n';
        out << buf;
      }
    }
    manifest["channels"].push_back({{"id", std::string(channel_name(id))},
                                    {"file", file},
                                    {"fs", ch.fs()},
                                    {"kind", ch.kind() == ChannelKind::kWaveform ? "waveform"
                                                                                 : "numeric"}});
  }
  const auto path = dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << manifest.dump(2) << '\n';
  return path;
}

std::vector<GroundTruthLabel> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open labels " + path.string());
  std::vector<GroundTruthLabel> labels;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view row = trim(line);
    if (row.empty() || (line_no == 1 && row == "event_id,y")) continue;
    const auto comma = row.rfind(',');
    int y = -1;
    if (comma == std::string_view::npos || !parse_number(row.substr(comma + 1), y) ||
        (y != 0 && y != 1)) {
      throw Error(ErrorCode::kMalformedRow, "malformed label row " + std::to_string(line_no));
    }
    std::string id(trim(row.substr(0, comma)));
    if (!seen.insert(id).second) throw Error(ErrorCode::kDuplicateName, "duplicate label", id);
    labels.push_back({std::move(id), y});
  }
  return labels;
}

void write_labels(const std::vector<GroundTruthLabel>& labels, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "event_id,y\n";
  for (const auto& l : labels) out << l.event_id << ',' << l.y << '\n';
}

}  // namespace vitalws
