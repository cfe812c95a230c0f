#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "vitalws/data_model.hpp"
#include "vitalws/error.hpp"

namespace vitalws {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("vitalws_dm_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

Channel contiguous(ChannelId id, double fs, std::int64_t start, std::size_t n, double value = 1.0) {
  return Channel(id, channel_kind(id), fs, {Segment{start, std::vector<double>(n, value)}});
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

ErrorCode load_error(const fs::path& manifest) {
  try {
    load_patient_record(manifest);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::kIo;
}

TEST(Channel, RejectsOverlappingSegments) {
  EXPECT_THROW(Channel(ChannelId::kHR, ChannelKind::kNumeric, 1.0,
                       {Segment{0, {1, 2, 3}}, Segment{2, {4}}}),
               Error);
}

TEST(Channel, CoalescesAdjacentRuns) {
  const Channel c(ChannelId::kHR, ChannelKind::kNumeric, 1.0, {Segment{0, {1, 2}}, Segment{2, {3}}});
  EXPECT_EQ(c.segments().size(), 1u);
  EXPECT_EQ(c.sample_count(), 3u);
}

TEST(LoadPatientRecord, ParsesRespChannel) {
  TempDir dir;
  PatientRecord rec{"p1", {}};
  rec.channels.emplace(ChannelId::kResp, contiguous(ChannelId::kResp, 62.5, 0, 7500, 0.25));
  const auto manifest = write_patient_record(rec, dir.path());
  const auto loaded = load_patient_record(manifest);
  const auto& resp = loaded.channels.at(ChannelId::kResp);
  EXPECT_EQ(resp.sample_count(), 7500u);
  EXPECT_EQ(resp.fs(), 62.5);
}

TEST(LoadPatientRecord, PreservesGaps) {
  TempDir dir;
  std::vector<std::int64_t> idx;
  std::vector<double> val;
  for (std::int64_t i = 0; i < 60; ++i) {
    if (i >= 20 && i < 30) continue;
    idx.push_back(i);
    val.push_back(70.0 + static_cast<double>(i));
  }
  PatientRecord rec{"p1", {}};
  rec.channels.emplace(ChannelId::kHR,
                       Channel::from_samples(ChannelId::kHR, ChannelKind::kNumeric, 1.0, idx, val));
  const auto loaded = load_patient_record(write_patient_record(rec, dir.path()));
  const auto& hr = loaded.channels.at(ChannelId::kHR);
  EXPECT_EQ(hr.sample_count(), 50u);
  ASSERT_EQ(hr.segments().size(), 2u);
  EXPECT_EQ(hr.segments()[0].end(), 20);
  EXPECT_EQ(hr.segments()[1].start, 30);
}

TEST(LoadPatientRecord, RoundTripIsBitExact) {
  TempDir dir;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 1e3);
  PatientRecord rec{"patient-x", {}};
  std::vector<double> v(5000);
  for (auto& x : v) x = noise(rng);
  v[0] = 1e-310;  // subnormal
  v[1] = -0.0;
  rec.channels.emplace(ChannelId::kPleth, Channel(ChannelId::kPleth, ChannelKind::kWaveform, 125.0,
                                                  {Segment{10, v}, Segment{6000, {1.5, 2.5}}}));
  rec.channels.emplace(ChannelId::kSpO2, contiguous(ChannelId::kSpO2, 1.0, 0, 100, 97.0));
  const auto loaded = load_patient_record(write_patient_record(rec, dir.path()));
  EXPECT_EQ(loaded.patient_id, rec.patient_id);
  ASSERT_EQ(loaded.channels.size(), 2u);
  EXPECT_EQ(loaded.channels.at(ChannelId::kPleth), rec.channels.at(ChannelId::kPleth));
  EXPECT_EQ(loaded.channels.at(ChannelId::kSpO2), rec.channels.at(ChannelId::kSpO2));
  EXPECT_TRUE(std::signbit(loaded.channels.at(ChannelId::kPleth).segments()[0].values[1]));
}

TEST(LoadPatientRecord, FsMismatchNamesChannel) {
  TempDir dir;
  write_text(dir.path() / "ecg.csv", "index,value\n0,1\n");
  write_text(dir.path() / "manifest.json",
             R"({"patient_id":"p","channels":[{"id":"ECG_II","file":"ecg.csv","fs":300,"kind":"waveform"}]})");
  try {
    load_patient_record(dir.path() / "manifest.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFsMismatch);
    EXPECT_EQ(e.context(), "ECG_II");
    EXPECT_NE(std::string(e.what()).find("fs mismatch"), std::string::npos);
  }
}

TEST(LoadPatientRecord, DistinctErrors) {
  TempDir dir;
  const auto m = dir.path() / "manifest.json";
  EXPECT_EQ(load_error(m), ErrorCode::kMissingFile);

  write_text(m, R"({"patient_id":"p","channels":[{"id":"HR","file":"hr.csv","fs":1,"kind":"numeric"}]})");
  EXPECT_EQ(load_error(m), ErrorCode::kMissingFile);

  write_text(dir.path() / "hr.csv", "index,value\n0,70\n1,abc\n");
  EXPECT_EQ(load_error(m), ErrorCode::kMalformedRow);

  write_text(dir.path() / "hr.csv", "index,value\n0,70\n0,71\n");
  EXPECT_EQ(load_error(m), ErrorCode::kMalformedRow);

  write_text(dir.path() / "hr.csv", "index,value\n0,70\n1,71\n");
  write_text(m, R"({"patient_id":"p","channels":[
      {"id":"HR","file":"hr.csv","fs":1,"kind":"numeric"},
      {"id":"HR","file":"hr.csv","fs":1,"kind":"numeric"}]})");
  EXPECT_EQ(load_error(m), ErrorCode::kDuplicateChannel);

  write_text(m, R"({"patient_id":"p","channels":[{"id":"CO2","file":"hr.csv","fs":1}]})");
  EXPECT_EQ(load_error(m), ErrorCode::kUnknownChannel);

  write_text(m, "{not json");
  EXPECT_EQ(load_error(m), ErrorCode::kBadManifest);
}

TEST(SliceWindow, RespBound) {
  PatientRecord rec{"p", {}};
  rec.channels.emplace(ChannelId::kResp, contiguous(ChannelId::kResp, 62.5, 0, 62500));
  const auto view = slice_window(rec, 37.3, 60.0);
  EXPECT_LE(view.at(ChannelId::kResp).sample_count(), 3750u);
  EXPECT_GE(view.at(ChannelId::kResp).sample_count(), 3749u);
}

TEST(SliceWindow, InsideGapIsEmpty) {
  PatientRecord rec{"p", {}};
  rec.channels.emplace(ChannelId::kHR,
                       Channel(ChannelId::kHR, ChannelKind::kNumeric, 1.0,
                               {Segment{0, std::vector<double>(100, 1.0)},
                                Segment{500, std::vector<double>(100, 1.0)}}));
  const auto view = slice_window(rec, 200.0, 60.0);
  ASSERT_TRUE(view.has(ChannelId::kHR));
  EXPECT_TRUE(view.at(ChannelId::kHR).empty());
  EXPECT_EQ(channel_density(view, ChannelId::kHR), 0.0);
}

TEST(SliceWindow, StraddlingGap) {
  PatientRecord rec{"p", {}};
  rec.channels.emplace(ChannelId::kHR,
                       Channel(ChannelId::kHR, ChannelKind::kNumeric, 1.0,
                               {Segment{0, std::vector<double>(30, 1.0)},
                                Segment{50, std::vector<double>(100, 1.0)}}));
  const auto view = slice_window(rec, 10.0, 60.0);
  EXPECT_EQ(view.at(ChannelId::kHR).sample_count(), 40u);
}

TEST(SliceWindow, NestedSliceEqualsIntersection) {
  std::mt19937_64 rng(9);
  std::vector<std::int64_t> idx;
  std::vector<double> val;
  for (std::int64_t i = 0; i < 5000; ++i) {
    if (rng() % 7 == 0) continue;
    idx.push_back(i);
    val.push_back(static_cast<double>(i));
  }
  PatientRecord rec{"p", {}};
  rec.channels.emplace(ChannelId::kResp,
                       Channel::from_samples(ChannelId::kResp, ChannelKind::kWaveform, 62.5, idx, val));
  rec.channels.emplace(ChannelId::kRR, contiguous(ChannelId::kRR, 1.0, 0, 80));
  std::uniform_real_distribution<double> u(0.0, 70.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = u(rng), da = 1.0 + u(rng);
    const double b = u(rng), db = 1.0 + u(rng);
    const auto nested = slice_window(slice_window(rec, a, da), b, db);
    const double lo = std::max(a, b);
    const double hi = std::min(a + da, b + db);
    if (hi <= lo) {
      EXPECT_TRUE(nested.at(ChannelId::kResp).empty());
      continue;
    }
    const auto direct = slice_window(rec, lo, hi - lo);
    EXPECT_EQ(nested.at(ChannelId::kResp), direct.at(ChannelId::kResp));
    EXPECT_EQ(nested.at(ChannelId::kRR), direct.at(ChannelId::kRR));
  }
}

TEST(ChannelDensity, Examples) {
  std::vector<std::int64_t> idx;
  for (std::int64_t i = 0; i < 39; ++i) idx.push_back(i);
  const std::vector<double> val(39, 15.0);
  PatientRecord rec{"p", {}};
  rec.channels.emplace(ChannelId::kRR,
                       Channel::from_samples(ChannelId::kRR, ChannelKind::kNumeric, 1.0, idx, val));
  rec.channels.emplace(ChannelId::kHR, contiguous(ChannelId::kHR, 1.0, 0, 60));
  const auto view = slice_window(rec, 0.0, 60.0);
  EXPECT_DOUBLE_EQ(channel_density(view, ChannelId::kRR), 0.65);
  EXPECT_DOUBLE_EQ(channel_density(view, ChannelId::kHR), 1.0);
  EXPECT_THROW(channel_density(view, ChannelId::kSpO2), Error);
}

TEST(ChannelDensity, MonotoneUnderDeletion) {
  std::mt19937_64 rng(1);
  std::vector<std::int64_t> idx;
  for (std::int64_t i = 0; i < 3750; ++i) idx.push_back(i);
  double prev = 1.0;
  while (!idx.empty()) {
    idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(rng() % idx.size()));
    const std::vector<double> val(idx.size(), 0.0);
    PatientRecord rec{"p", {}};
    rec.channels.emplace(ChannelId::kResp, Channel::from_samples(ChannelId::kResp, ChannelKind::kWaveform,
                                                                 62.5, idx, val));
    const double d = channel_density(slice_window(rec, 0.0, 60.0), ChannelId::kResp);
    EXPECT_LE(d, prev);
    prev = d;
    if (idx.size() > 100) idx.resize(idx.size() - 100);
  }
}

TEST(Labels, RoundTrip) {
  TempDir dir;
  const std::vector<GroundTruthLabel> labels{{"p1-RR-0", 0}, {"p1-RR-1", 1}};
  write_labels(labels, dir.path() / "labels.csv");
  EXPECT_EQ(load_labels(dir.path() / "labels.csv"), labels);
  write_text(dir.path() / "bad.csv", "event_id,y\nx,2\n");
  EXPECT_THROW(load_labels(dir.path() / "bad.csv"), Error);
}

}  // namespace
}  // namespace vitalws
