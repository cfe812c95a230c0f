#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "vitalws/dsp.hpp"
#include "vitalws/error.hpp"
#include "vitalws/evaluation.hpp"
#include "vitalws/stats.hpp"
#include "vitalws/synth.hpp"

namespace vitalws {
namespace {

namespace fs = std::filesystem;

CohortSpec small_spec(std::uint64_t seed, double rate = 0.26) {
  CohortSpec s;
  s.n_patients = 3;
  s.hours_per_patient = 2.0;
  s.artifact_rate = rate;
  s.seed = seed;
  s.workers = 1;
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("vitalws_synth_" + name);
  fs::remove_all(dir);
  return dir;
}

TEST(CohortSpec, Validation) {
  auto s = small_spec(1);
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.slots_per_patient(), 4);
  auto bad = s;
  bad.n_patients = 1;
  EXPECT_THROW(bad.validate(), Error);
  bad = s;
  bad.artifact_rate = 1.5;
  EXPECT_THROW(bad.validate(), Error);
  bad = s;
  bad.hours_per_patient = 0.2;
  EXPECT_THROW(bad.validate(), Error);
  bad = s;
  bad.artifact_kinds = {ArtifactKind::kFlatline, ArtifactKind::kFlatline};
  EXPECT_THROW(bad.validate(), Error);
  bad = s;
  bad.artifact_kinds.clear();
  EXPECT_THROW(bad.validate(), Error);
  bad.artifact_rate = 0.0;
  EXPECT_NO_THROW(bad.validate());
}

TEST(ArtifactKind, NamesRoundTrip) {
  for (const auto k : all_artifact_kinds()) EXPECT_EQ(parse_artifact_kind(artifact_kind_name(k)), k);
  EXPECT_FALSE(parse_artifact_kind("flatline").has_value());
}

TEST(Synth, DeterministicAcrossRunsAndWorkers) {
  auto spec = small_spec(7);
  const auto a = generate_cohort(spec);
  spec.workers = 3;
  const auto b = generate_cohort(spec);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].patient_id, b.records[i].patient_id);
    EXPECT_EQ(a.records[i].channels, b.records[i].channels);
  }
  EXPECT_EQ(a.labels, b.labels);

  const auto d1 = scratch("det1"), d2 = scratch("det2");
  write_cohort(a, d1);
  write_cohort(b, d2);
  for (const auto& entry : fs::recursive_directory_iterator(d1)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), d1);
    EXPECT_EQ(slurp(entry.path()), slurp(d2 / rel)) << rel;
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(Synth, SeedChangesOutput) {
  const auto a = generate_patient(small_spec(1), 0);
  const auto b = generate_patient(small_spec(2), 0);
  EXPECT_NE(a.record.channels, b.record.channels);
}

TEST(Synth, PatientsAreIndependentOfCohortSize) {
  auto spec = small_spec(3);
  const auto one = generate_patient(spec, 1);
  spec.n_patients = 5;
  const auto again = generate_patient(spec, 1);
  EXPECT_EQ(one.record.channels, again.record.channels);
  EXPECT_THROW(generate_patient(spec, 5), Error);
}

TEST(Synth, RateZeroMeansAllReal) {
  const auto c = generate_cohort(small_spec(11, 0.0));
  ASSERT_FALSE(c.labels.empty());
  for (const auto& l : c.labels) EXPECT_EQ(l.y, 0);
  for (const auto& p : c.plants) EXPECT_FALSE(p.kind.has_value());
}

TEST(Synth, RateOneMeansAllArtifact) {
  auto spec = small_spec(12, 1.0);
  spec.artifact_kinds = {ArtifactKind::kFlatline};
  const auto c = generate_cohort(spec);
  for (const auto& p : c.plants) {
    EXPECT_EQ(p.y, 1);
    EXPECT_EQ(p.kind, ArtifactKind::kFlatline);
  }
}

TEST(Synth, ChannelLayout) {
  const auto c = generate_cohort(small_spec(5));
  for (const auto& r : c.records) {
    EXPECT_TRUE(r.has(ChannelId::kRR));
    EXPECT_TRUE(r.has(ChannelId::kHR));
    EXPECT_TRUE(r.has(ChannelId::kEcgII));
    EXPECT_TRUE(r.has(ChannelId::kResp));
    EXPECT_NE(r.has(ChannelId::kSpO2), r.has(ChannelId::kSpO2T));
    EXPECT_EQ(r.has(ChannelId::kPleth), r.has(ChannelId::kSpO2));
    EXPECT_EQ(r.telemetric(), r.has(ChannelId::kPlethT));
    for (const auto& [id, ch] : r.channels) EXPECT_TRUE(fs_allowed(id, ch.fs())) << channel_name(id);
    // Numerics cover the record; waveforms only the stretches around alerts.
    EXPECT_EQ(r.find(ChannelId::kRR)->sample_count(), 4u * 1800u);
    EXPECT_EQ(r.find(ChannelId::kEcgII)->segments().size(), 4u);
  }
}

TEST(Synth, WriteAndReloadRoundTrip) {
  const auto c = generate_cohort(small_spec(9));
  const auto dir = scratch("rt");
  const auto manifests = write_cohort(c, dir);
  EXPECT_EQ(find_manifests(dir), manifests);
  for (std::size_t i = 0; i < manifests.size(); ++i) {
    const auto back = load_patient_record(manifests[i]);
    EXPECT_EQ(back.patient_id, c.records[i].patient_id);
    EXPECT_EQ(back.channels, c.records[i].channels);
  }
  EXPECT_EQ(load_labels(dir / "labels.csv"), c.labels);
  EXPECT_TRUE(fs::exists(dir / "plants.csv"));
  fs::remove_all(dir);
  EXPECT_THROW(find_manifests(dir), Error);
}

// A clean patient and one of its planted events of the given type.
struct Planted {
  PatientRecord record;
  PlantedEvent plant;
};

Planted clean_plant(AlertType tau, std::uint64_t seed = 21) {
  const auto sp = generate_patient(small_spec(seed, 0.0), 0);
  for (const auto& p : sp.plants) {
    if (p.tau == tau) return {sp.record, p};
  }
  throw std::runtime_error("no plant of this type");
}

std::vector<double> wave_over(const PatientRecord& r, ChannelId id, double start, double dur) {
  return slice_window(r, start, dur).at(id).values();
}

TEST(InjectArtifact, FlatlineZeroesAmplitude) {
  const dsp::DspConfig cfg;
  auto [rec, plant] = clean_plant(AlertType::kRR);
  EXPECT_GT(dsp::amplitude_metric(wave_over(rec, ChannelId::kResp, plant.start, 120), 62.5, cfg.resp_peaks), 0.1);
  const auto out = inject_artifact(rec, AlertType::kRR, plant.start, plant.end, ArtifactKind::kFlatline, 1);
  EXPECT_EQ(dsp::amplitude_metric(wave_over(out, ChannelId::kResp, plant.start, 120), 62.5, cfg.resp_peaks), 0.0);
  // Other channels and the trigger numeric are untouched.
  EXPECT_EQ(out.channels.at(ChannelId::kRR), rec.channels.at(ChannelId::kRR));
  EXPECT_EQ(out.channels.at(ChannelId::kEcgII), rec.channels.at(ChannelId::kEcgII));

  auto [rec2, plant2] = clean_plant(AlertType::kSpO2);
  const auto pleth = rec2.has(ChannelId::kPleth) ? ChannelId::kPleth : ChannelId::kPlethT;
  const auto out2 = inject_artifact(rec2, AlertType::kSpO2, plant2.start, plant2.end, ArtifactKind::kFlatline, 1);
  EXPECT_EQ(dsp::amplitude_metric(wave_over(out2, pleth, plant2.start, 120), 125.0, cfg.pleth_peaks), 0.0);
}

TEST(InjectArtifact, DropoutLeavesTwentyPercent) {
  auto [rec, plant] = clean_plant(AlertType::kSpO2);
  const auto pleth = rec.has(ChannelId::kPleth) ? ChannelId::kPleth : ChannelId::kPlethT;
  const auto out = inject_artifact(rec, AlertType::kSpO2, plant.start, plant.end, ArtifactKind::kSensorDropout, 4);
  for (int w = 0; w < 3; ++w) {
    const auto view = slice_window(out, plant.start + 60.0 * w, 60.0);
    EXPECT_NEAR(channel_density(view, pleth), 0.2, 0.02) << w;
  }
  // Deletion count is exact over the whole interval.
  const auto before = slice_window(rec, plant.start, plant.end - plant.start).at(pleth).sample_count();
  const auto after = slice_window(out, plant.start, plant.end - plant.start).at(pleth).sample_count();
  const double kept = static_cast<double>(after) / static_cast<double>(before);
  EXPECT_NEAR(kept, 0.2, 0.005);
  EXPECT_EQ(out.channels.at(ChannelId::kHR), rec.channels.at(ChannelId::kHR));
}

TEST(InjectArtifact, NoiseBurstKeepsDensityAndChangesValues) {
  auto [rec, plant] = clean_plant(AlertType::kRR);
  const auto out = inject_artifact(rec, AlertType::kRR, plant.start, plant.end, ArtifactKind::kNoiseBurst, 2);
  const auto a = wave_over(rec, ChannelId::kResp, plant.start, 60);
  const auto b = wave_over(out, ChannelId::kResp, plant.start, 60);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_NE(a, b);
  // Replaced, not overlaid: the burst is uncorrelated with the breathing.
  const double ma = stats::mean(a), mb = stats::mean(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  EXPECT_LT(std::abs(sab / std::sqrt(saa * sbb)), 0.1);
  EXPECT_EQ(out.channels.at(ChannelId::kResp).sample_count(), rec.channels.at(ChannelId::kResp).sample_count());
}

TEST(InjectArtifact, RrMismatchMovesOnlyTheNumeric) {
  auto [rec, plant] = clean_plant(AlertType::kRR);
  // A real alert: numeric and lungs agree until the numeric is moved.
  const auto out = inject_artifact(rec, AlertType::kRR, plant.start, plant.end,
                                   ArtifactKind::kNumericWaveformMismatch, 3);
  EXPECT_EQ(out.channels.at(ChannelId::kResp), rec.channels.at(ChannelId::kResp));
  const auto view = slice_window(out, plant.start, 60.0);
  const auto est = dsp::estimate_resp(view.at(ChannelId::kResp).values(), 62.5);
  const double med = stats::median(view.at(ChannelId::kRR).values());
  ASSERT_TRUE(est.fft_rate.has_value());
  EXPECT_GT(std::abs(*est.fft_rate - med) / med, 0.5);
  // Still alarming after the move.
  const auto events = detect_alert_events(out, AlertType::kRR);
  EXPECT_TRUE(std::any_of(events.begin(), events.end(), [&](const AlertEvent& e) {
    return e.t < plant.end && e.t + e.d > plant.start;
  }));
}

TEST(InjectArtifact, SpO2MismatchScalesHr) {
  auto [rec, plant] = clean_plant(AlertType::kSpO2);
  const auto out = inject_artifact(rec, AlertType::kSpO2, plant.start, plant.end,
                                   ArtifactKind::kNumericWaveformMismatch, 5);
  const auto before = slice_window(rec, plant.start, 60).at(ChannelId::kHR).values();
  const auto after = slice_window(out, plant.start, 60).at(ChannelId::kHR).values();
  const double ratio = stats::median(after) / stats::median(before);
  EXPECT_TRUE(std::abs(ratio - 1.4) < 0.01 || std::abs(ratio - 0.6) < 0.01) << ratio;
  // Outside the interval nothing moved.
  EXPECT_EQ(slice_window(rec, plant.start - 100, 60).at(ChannelId::kHR),
            slice_window(out, plant.start - 100, 60).at(ChannelId::kHR));
  for (const auto id : {ChannelId::kEcgII, ChannelId::kSpO2, ChannelId::kSpO2T, ChannelId::kPleth, ChannelId::kPlethT}) {
    if (rec.has(id)) EXPECT_EQ(out.channels.at(id), rec.channels.at(id));
  }
}

TEST(InjectArtifact, IntervalChecks) {
  auto [rec, plant] = clean_plant(AlertType::kRR);
  EXPECT_THROW(inject_artifact(rec, AlertType::kRR, -1, 10, ArtifactKind::kFlatline, 0), Error);
  EXPECT_THROW(inject_artifact(rec, AlertType::kRR, 10, 10, ArtifactKind::kFlatline, 0), Error);
  EXPECT_THROW(inject_artifact(rec, AlertType::kRR, 0, 1e9, ArtifactKind::kFlatline, 0), Error);
  try {
    inject_artifact(rec, AlertType::kRR, 5, 1, ArtifactKind::kNoiseBurst, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
}

TEST(Synth, CleanWindowsAreCoherent) {
  // Waveform-derived rates agree with the numerics on real alerts.
  const auto sp = generate_patient(small_spec(31, 0.0), 1);
  for (const auto& p : sp.plants) {
    const auto view = slice_window(sp.record, p.start + 20.0, 60.0);
    const auto est = dsp::compute_estimates(view);
    const double hr = stats::median(view.at(ChannelId::kHR).values());
    ASSERT_TRUE(est.hr_ecg_ii.has_value());
    EXPECT_NEAR(*est.hr_ecg_ii / hr, 1.0, 0.05);
    const auto& pl = sp.record.telemetric() ? est.pleth_t : est.pleth;
    ASSERT_TRUE(pl.hr_fft.has_value());
    EXPECT_NEAR(*pl.hr_fft / hr, 1.0, 0.05);
    if (p.tau == AlertType::kRR) {
      const double rr = stats::median(view.at(ChannelId::kRR).values());
      ASSERT_TRUE(est.resp.fft_rate.has_value());
      EXPECT_NEAR(*est.resp.fft_rate / rr, 1.0, 0.1);
    }
  }
}

// The 40-patient cohort used by the acceptance run, built once.
class SynthCohort : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    CohortSpec spec;
    spec.seed = 7;
    cohort_ = new Cohort(generate_cohort(spec));
    for (const auto tau : {AlertType::kRR, AlertType::kSpO2}) {
      data_->push_back(build_dataset(cohort_->records, cohort_->labels, tau));
    }
  }
  static void TearDownTestSuite() {
    delete cohort_;
    cohort_ = nullptr;
    data_->clear();
  }
  static Cohort* cohort_;
  static std::vector<Dataset>* data_;
};

Cohort* SynthCohort::cohort_ = nullptr;
std::vector<Dataset>* SynthCohort::data_ = new std::vector<Dataset>();

TEST_F(SynthCohort, ArtifactFractionNearRate) {
  std::size_t art = 0;
  for (const auto& p : cohort_->plants) art += p.y;
  const double frac = static_cast<double>(art) / static_cast<double>(cohort_->plants.size());
  EXPECT_EQ(cohort_->plants.size(), 400u);
  EXPECT_NEAR(frac, 0.26, 0.07);
}

TEST_F(SynthCohort, EveryPlantIsRecoveredOnce) {
  std::size_t detected = 0;
  for (const auto& r : cohort_->records) {
    for (const auto tau : {AlertType::kRR, AlertType::kSpO2}) detected += detect_alert_events(r, tau).size();
  }
  EXPECT_EQ(detected, cohort_->plants.size());  // nothing spurious
  for (const auto& p : cohort_->plants) EXPECT_FALSE(p.event_id.empty()) << p.patient_id << " " << p.start;
  EXPECT_EQ(cohort_->labels.size(), cohort_->plants.size());
}

TEST_F(SynthCohort, LfMajoritiesFollowTheLabels) {
  for (const auto& ds : *data_) {
    std::size_t real_ok = 0, real_n = 0, art_ok = 0, art_n = 0;
    for (std::size_t i = 0; i < ds.windows.size(); ++i) {
      int r = 0, a = 0;
      for (const auto v : ds.votes.row(i)) {
        r += v == Vote::kReal;
        a += v == Vote::kArtifact;
      }
      if (*ds.windows[i].y == 0) {
        ++real_n;
        real_ok += r > a;
      } else {
        ++art_n;
        art_ok += a > r;
      }
    }
    const auto tau = std::string(alert_type_name(ds.tau));
    EXPECT_GE(static_cast<double>(real_ok) / static_cast<double>(real_n), 0.80) << tau;
    EXPECT_GE(static_cast<double>(art_ok) / static_cast<double>(art_n), 0.70) << tau;
    EXPECT_EQ(ds.unlabeled_windows, 0u);
  }
}

TEST_F(SynthCohort, EveryKindAppears) {
  std::map<ArtifactKind, int> seen;
  for (const auto& p : cohort_->plants) {
    if (p.kind) ++seen[*p.kind];
  }
  EXPECT_EQ(seen.size(), 4u);
}

}  // namespace
}  // namespace vitalws
