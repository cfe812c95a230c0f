#include "vitalws/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "vitalws/error.hpp"
#include "vitalws/parallel.hpp"
#include "vitalws/rng.hpp"
#include "vitalws/stats.hpp"

namespace vitalws {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Every waveform rate divides this one, so all waveforms share one phase grid.
constexpr double kMasterFs = 250.0;
constexpr double kWaveLead = 6.0;    // seconds of waveform before the ramp
constexpr double kWaveTail = 200.0;  // seconds of waveform after the plateau starts

struct PatientParams {
  bool telemetric = false;
  bool ecg_iii = false;
  bool art = false;
  double rr = 15.0;
  double hr = 75.0;
  double spo2 = 97.0;
  double resp_amp = 1.0;
  double pleth_amp = 1.0;
  double ecg_amp = 1.0;
  // Slow rate wander: two sinusoids per rate.
  double wander_period[4] = {};
  double wander_phase[4] = {};
};

// Plan for one planted alert. Rates and numerics blend from baseline to the
// plateau value over the ramps.
struct Episode {
  AlertType tau = AlertType::kRR;
  double ramp0 = 0.0, plat0 = 0.0, plat1 = 0.0, ramp1 = 0.0;
  bool artifact = false;
  std::optional<ArtifactKind> kind;
  std::optional<double> resp_target;  // breaths/min the lungs actually follow
  double hr_scale = 1.0;
  // Trigger numeric on the plateau: target plus noise, clamped when smooth.
  std::optional<double> numeric_target;
  double numeric_sd = 0.0;
  bool erratic = false;

  double weight(double t) const {
    if (t < ramp0 || t >= ramp1) return 0.0;
    if (t < plat0) return (t - ramp0) / (plat0 - ramp0);
    if (t < plat1) return 1.0;
    return (ramp1 - t) / (ramp1 - plat1);
  }
};

double clamped_normal(Rng& rng, double sd, double limit) {
  return std::clamp(normal(rng, 0.0, sd), -limit, limit);
}

double round_to(double v, double step) { return std::round(v / step) * step; }

double wander(const PatientParams& p, int which, double t) {
  const int a = 2 * which, b = a + 1;
  return 1.0 + 0.025 * std::sin(kTwoPi * t / p.wander_period[a] + p.wander_phase[a]) +
         0.015 * std::sin(kTwoPi * t / p.wander_period[b] + p.wander_phase[b]);
}

const Episode* episode_at(const std::vector<Episode>& eps, double t) {
  for (const auto& e : eps) {
    if (t >= e.ramp0 && t < e.ramp1) return &e;
  }
  return nullptr;
}

double resp_rate(const PatientParams& p, const std::vector<Episode>& eps, double t) {
  const double base = p.rr * wander(p, 0, t);
  const auto* e = episode_at(eps, t);
  if (!e || !e->resp_target) return base;
  const double w = e->weight(t);
  return (1.0 - w) * base + w * *e->resp_target * wander(p, 0, t);
}

double heart_rate(const PatientParams& p, const std::vector<Episode>& eps, double t) {
  const double base = p.hr * wander(p, 1, t);
  const auto* e = episode_at(eps, t);
  if (!e) return base;
  return base * (1.0 + (e->hr_scale - 1.0) * e->weight(t));
}

PatientParams draw_params(Rng& rng) {
  PatientParams p;
  p.telemetric = bernoulli(rng, 0.3);
  p.ecg_iii = bernoulli(rng, 0.6);
  p.art = bernoulli(rng, 0.15);
  p.rr = uniform_real(rng, 13.0, 18.0);
  p.hr = uniform_real(rng, 60.0, 95.0);
  p.spo2 = uniform_real(rng, 94.5, 99.0);
  p.resp_amp = uniform_real(rng, 0.6, 1.2);
  p.pleth_amp = uniform_real(rng, 0.8, 1.5);
  p.ecg_amp = uniform_real(rng, 0.8, 1.5);
  for (int k = 0; k < 4; ++k) {
    p.wander_period[k] = k % 2 == 0 ? uniform_real(rng, 60.0, 140.0) : uniform_real(rng, 200.0, 400.0);
    p.wander_phase[k] = uniform_real(rng, 0.0, kTwoPi);
  }
  return p;
}

Episode draw_episode(Rng& rng, const CohortSpec& spec, AlertType tau, double slot_start) {
  Episode e;
  e.tau = tau;
  const double ramp = tau == AlertType::kRR ? 10.0 : 20.0;
  e.plat0 = slot_start + 600.0 + static_cast<double>(uniform_int<int>(rng, -120, 120));
  e.ramp0 = e.plat0 - ramp;
  e.plat1 = e.plat0 + static_cast<double>(uniform_int<int>(rng, 330, 600));
  e.ramp1 = e.plat1 + ramp;
  e.artifact = bernoulli(rng, spec.artifact_rate);
  if (e.artifact) {
    e.kind = spec.artifact_kinds[uniform_int<std::size_t>(rng, 0, spec.artifact_kinds.size() - 1)];
  }

  if (tau == AlertType::kRR) {
    const bool high = bernoulli(rng, e.artifact ? 0.8 : 0.7);
    if (!e.artifact) {
      e.resp_target = high ? uniform_real(rng, 32.0, 38.0) : uniform_real(rng, 5.5, 7.8);
      e.hr_scale = high ? uniform_real(rng, 1.1, 1.25) : 1.0;
      e.numeric_target = e.resp_target;
      e.numeric_sd = 0.8;
      return e;
    }
    // Impedance numerics swing wildly under motion and loose leads.
    e.erratic = bernoulli(rng, 0.75);
    if (e.kind == ArtifactKind::kNumericWaveformMismatch) {
      // The numeric stays at baseline here; inject_artifact moves it.
      e.numeric_sd = e.erratic ? 2.0 : 0.0;
      return e;
    }
    if (e.erratic) {
      e.numeric_target = high ? uniform_real(rng, 38.0, 44.0) : uniform_real(rng, 4.0, 7.0);
      e.numeric_sd = high ? 7.0 : 1.5;
    } else {
      e.numeric_target = high ? uniform_real(rng, 32.0, 38.0) : uniform_real(rng, 5.5, 7.8);
      e.numeric_sd = 0.8;
    }
    return e;
  }

  // SpO2: real desaturations often come with tachypnea and some tachycardia.
  const bool tachypnea = bernoulli(rng, e.artifact ? 0.15 : 0.5);
  if (tachypnea) e.resp_target = uniform_real(rng, 21.0, 26.0);
  if (!e.artifact) {
    e.hr_scale = uniform_real(rng, 1.0, 1.15);
    e.numeric_target = uniform_real(rng, 80.0, 87.5);
    e.numeric_sd = 0.6;
    return e;
  }
  // The oximeter reading is erratic only when its own waveform is corrupted,
  // and not always then.
  double p_erratic = 0.0;
  switch (*e.kind) {
    case ArtifactKind::kFlatline: p_erratic = 0.6; break;
    case ArtifactKind::kNoiseBurst: p_erratic = 0.35; break;
    case ArtifactKind::kSensorDropout: p_erratic = 0.35; break;
    case ArtifactKind::kNumericWaveformMismatch: p_erratic = 0.0; break;
  }
  e.erratic = bernoulli(rng, p_erratic);
  e.numeric_target = e.erratic ? uniform_real(rng, 76.0, 83.0) : uniform_real(rng, 78.0, 87.5);
  e.numeric_sd = e.erratic ? 4.5 : 0.6;
  return e;
}

Channel numeric_channel(ChannelId id, std::vector<double> values) {
  return Channel(id, ChannelKind::kNumeric, 1.0, {Segment{0, std::move(values)}});
}

// Numerics at 1 Hz over the whole record.
void add_numerics(PatientRecord& rec, const PatientParams& p, const std::vector<Episode>& eps,
                  std::int64_t seconds, Rng& rng) {
  std::vector<double> rr(static_cast<std::size_t>(seconds)), hr(rr.size()), spo2(rr.size());
  for (std::int64_t k = 0; k < seconds; ++k) {
    const double t = static_cast<double>(k);
    const auto* e = episode_at(eps, t);
    const double w = e ? e->weight(t) : 0.0;

    double r = resp_rate(p, eps, t) + clamped_normal(rng, 0.7, 2.0);
    double s = p.spo2 + clamped_normal(rng, 0.5, 1.5);
    const double h = heart_rate(p, eps, t) + clamped_normal(rng, 1.0, 3.0);

    if (e && e->tau == AlertType::kRR && !e->numeric_target && e->numeric_sd > 0.0) {
      r += w * normal(rng, 0.0, e->numeric_sd);
    } else if (e && e->tau == AlertType::kRR && e->numeric_target) {
      const double dev = e->erratic ? normal(rng, 0.0, e->numeric_sd) : clamped_normal(rng, e->numeric_sd, 2.0);
      r = (1.0 - w) * r + w * (*e->numeric_target + dev);
    } else if (e && e->tau == AlertType::kSpO2) {
      const double dev = e->erratic ? normal(rng, 0.0, e->numeric_sd) : clamped_normal(rng, e->numeric_sd, 1.5);
      s = (1.0 - w) * s + w * (*e->numeric_target + dev);
    }
    rr[static_cast<std::size_t>(k)] = round_to(std::clamp(r, 0.0, 80.0), 0.1);
    hr[static_cast<std::size_t>(k)] = round_to(std::clamp(h, 20.0, 250.0), 0.1);
    spo2[static_cast<std::size_t>(k)] = round_to(std::clamp(s, 50.0, 100.0), 0.1);
  }
  rec.channels.emplace(ChannelId::kRR, numeric_channel(ChannelId::kRR, std::move(rr)));
  rec.channels.emplace(ChannelId::kHR, numeric_channel(ChannelId::kHR, std::move(hr)));
  const auto sat = p.telemetric ? ChannelId::kSpO2T : ChannelId::kSpO2;
  rec.channels.emplace(sat, numeric_channel(sat, std::move(spo2)));
}

double pulse_shape(double u) {
  const double a = (u - 0.30) / 0.09, b = (u - 0.62) / 0.10;
  return std::exp(-a * a) + 0.35 * std::exp(-b * b);
}

struct WaveSegments {
  std::vector<Segment> ecg_ii, ecg_iii, pleth, art, resp;
};

// One gap-free stretch of every waveform over [t0, t1), both multiples of 2 s
// so that every channel's sample index is an integer.
void add_wave_stretch(WaveSegments& out, const PatientParams& p, const std::vector<Episode>& eps,
                      double t0, double t1, Rng& rng) {
  const auto n = static_cast<std::size_t>(std::llround((t1 - t0) * kMasterFs));
  double phi_r = uniform_real(rng, 0.0, kTwoPi);
  double phi_h = uniform_real(rng, 0.0, kTwoPi);
  Segment ecg2{std::llround(t0 * 250.0), {}}, ecg3{ecg2.start, {}};
  Segment pleth{std::llround(t0 * 125.0), {}}, art{pleth.start, {}};
  Segment resp{std::llround(t0 * 62.5), {}};
  const double drift_phase = uniform_real(rng, 0.0, kTwoPi);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = t0 + static_cast<double>(i) / kMasterFs;
    const double r = resp_rate(p, eps, t);
    const double h = heart_rate(p, eps, t);
    const double u = phi_h / kTwoPi - std::floor(phi_h / kTwoPi);
    const double beat_s = 60.0 / h;
    const double dt_r = (u < 0.5 ? u : u - 1.0) * beat_s;  // seconds from the nearest R peak
    const double breath = std::sin(phi_r);

    const double qrs = std::exp(-std::pow(dt_r / 0.012, 2)) - 0.15 * std::exp(-std::pow((dt_r + 0.03) / 0.01, 2));
    const double twave = 0.25 * std::exp(-std::pow((dt_r - 0.25) / 0.05, 2));
    ecg2.values.push_back(round_to(p.ecg_amp * (qrs + twave) + 0.05 * breath + normal(rng, 0.0, 0.02), 1e-4));
    if (p.ecg_iii) {
      ecg3.values.push_back(round_to(0.7 * p.ecg_amp * (qrs + twave) - 0.04 * breath + normal(rng, 0.0, 0.02), 1e-4));
    }
    if (i % 2 == 0) {
      const double pulse = pulse_shape(u);
      pleth.values.push_back(round_to(
          p.pleth_amp * ((1.0 + 0.2 * breath) * pulse + 0.08 * breath) + normal(rng, 0.0, 0.01), 1e-4));
      if (p.art) art.values.push_back(round_to(80.0 + 40.0 * pulse + 3.0 * breath + normal(rng, 0.0, 0.5), 1e-2));
    }
    if (i % 4 == 0) {
      const double drift = 0.05 * std::sin(kTwoPi * t / 23.0 + drift_phase);
      resp.values.push_back(round_to(
          p.resp_amp * (breath + 0.12 * std::sin(2.0 * phi_r + 0.7)) + drift + normal(rng, 0.0, 0.02), 1e-4));
    }
    phi_r += kTwoPi * r / 60.0 / kMasterFs;
    phi_h += kTwoPi * h / 60.0 / kMasterFs;
  }
  out.ecg_ii.push_back(std::move(ecg2));
  if (p.ecg_iii) out.ecg_iii.push_back(std::move(ecg3));
  out.pleth.push_back(std::move(pleth));
  if (p.art) out.art.push_back(std::move(art));
  out.resp.push_back(std::move(resp));
}

void add_waveforms(PatientRecord& rec, const PatientParams& p, const std::vector<Episode>& eps,
                   std::uint64_t seed, int index) {
  WaveSegments segs;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    auto rng = derived_rng({seed, static_cast<std::uint64_t>(index), k, 0x77617665});
    const double t0 = 2.0 * std::floor((eps[k].ramp0 - kWaveLead) / 2.0);
    const double t1 = 2.0 * std::ceil((eps[k].plat0 + kWaveTail) / 2.0);
    add_wave_stretch(segs, p, eps, t0, t1, rng);
  }
  auto put = [&](ChannelId id, double fs, std::vector<Segment> s) {
    if (!s.empty()) rec.channels.emplace(id, Channel(id, ChannelKind::kWaveform, fs, std::move(s)));
  };
  put(ChannelId::kEcgII, 250.0, std::move(segs.ecg_ii));
  put(ChannelId::kEcgIII, 250.0, std::move(segs.ecg_iii));
  put(p.telemetric ? ChannelId::kPlethT : ChannelId::kPleth, 125.0, std::move(segs.pleth));
  put(ChannelId::kArt, 125.0, std::move(segs.art));
  put(ChannelId::kResp, 62.5, std::move(segs.resp));
}

double record_seconds(const PatientRecord& record) {
  double end = 0.0;
  for (const auto& [id, ch] : record.channels) {
    if (!ch.empty()) end = std::max(end, static_cast<double>(ch.segments().back().end()) / ch.fs());
  }
  return end;
}

// Applies `fn` to the values of `ch` with index in [lo, hi), segment by segment.
template <class Fn>
Channel map_range(const Channel& ch, std::int64_t lo, std::int64_t hi, Fn&& fn) {
  auto segs = ch.segments();
  for (auto& s : segs) {
    const auto a = std::max(lo, s.start), b = std::min(hi, s.end());
    if (a >= b) continue;
    fn(std::span<double>(s.values).subspan(static_cast<std::size_t>(a - s.start), static_cast<std::size_t>(b - a)));
  }
  return Channel(ch.id(), ch.kind(), ch.fs(), std::move(segs));
}

Channel corrupt_waveform(const Channel& ch, std::int64_t lo, std::int64_t hi, ArtifactKind kind, Rng& rng) {
  switch (kind) {
    case ArtifactKind::kFlatline:
      return map_range(ch, lo, hi, [](std::span<double> v) {
        const double level = round_to(stats::mean(v), 1e-4);
        std::fill(v.begin(), v.end(), level);
      });
    case ArtifactKind::kNoiseBurst:
      return map_range(ch, lo, hi, [&](std::span<double> v) {
        const double mu = stats::mean(v);
        const double sd = v.size() > 1 ? std::max(stats::stddev(v), 1e-3) : 1.0;
        for (auto& x : v) x = round_to(normal(rng, mu, sd), 1e-4);
      });
    case ArtifactKind::kSensorDropout: {
      // Intermittent contact: the covered span is cut into 0.4 s blocks and
      // in every run of five blocks one survives, so any window keeps 20%.
      const auto block = std::max<std::int64_t>(1, std::llround(0.4 * ch.fs()));
      std::vector<std::int64_t> lost;
      for (std::int64_t g = lo; g < hi; g += 5 * block) {
        std::vector<std::int64_t> group;
        for (std::int64_t b = g; b < std::min(hi, g + 5 * block); b += block) group.push_back(b);
        shuffle(group, rng);
        const auto drop = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(group.size())));
        lost.insert(lost.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(drop));
      }
      std::sort(lost.begin(), lost.end());
      std::vector<std::int64_t> ki;
      std::vector<double> kv;
      for (const auto& s : ch.segments()) {
        for (std::size_t i = 0; i < s.values.size(); ++i) {
          const auto at = s.start + static_cast<std::int64_t>(i);
          if (at >= lo && at < hi) {
            const auto first = lo + (at - lo) / block * block;
            if (std::binary_search(lost.begin(), lost.end(), first)) continue;
          }
          ki.push_back(at);
          kv.push_back(s.values[i]);
        }
      }
      return Channel::from_samples(ch.id(), ch.kind(), ch.fs(), ki, kv);
    }
    case ArtifactKind::kNumericWaveformMismatch:
      break;
  }
  return ch;
}

std::vector<double> values_in(const Channel& ch, std::int64_t lo, std::int64_t hi) {
  std::vector<double> out;
  for (const auto& s : ch.segments()) {
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const auto at = s.start + static_cast<std::int64_t>(i);
      if (at >= lo && at < hi) out.push_back(s.values[i]);
    }
  }
  return out;
}

void match_plants(SynthPatient& sp, const AlertCriteria& criteria) {
  for (const auto tau : {AlertType::kRR, AlertType::kSpO2}) {
    for (const auto& ev : detect_alert_events(sp.record, tau, criteria)) {
      for (auto& pl : sp.plants) {
        if (pl.tau != tau || ev.t >= pl.end || ev.t + ev.d < pl.start) continue;
        if (pl.event_id.empty()) pl.event_id = ev.pid;
        sp.labels.push_back({ev.pid, pl.y});
        break;
      }
    }
  }
}

}  // namespace

std::string_view artifact_kind_name(ArtifactKind k) noexcept {
  switch (k) {
    case ArtifactKind::kFlatline: return "FLATLINE";
    case ArtifactKind::kNoiseBurst: return "NOISE_BURST";
    case ArtifactKind::kSensorDropout: return "SENSOR_DROPOUT";
    case ArtifactKind::kNumericWaveformMismatch: return "NUMERIC_WAVEFORM_MISMATCH";
  }
  return "?";
}

std::optional<ArtifactKind> parse_artifact_kind(std::string_view text) noexcept {
  for (const auto k : all_artifact_kinds()) {
    if (artifact_kind_name(k) == text) return k;
  }
  return std::nullopt;
}

std::vector<ArtifactKind> all_artifact_kinds() {
  return {ArtifactKind::kFlatline, ArtifactKind::kNoiseBurst, ArtifactKind::kSensorDropout,
          ArtifactKind::kNumericWaveformMismatch};
}

void CohortSpec::validate() const {
  if (n_patients < 2) throw Error(ErrorCode::kConfig, "n_patients must be at least 2");
  if (!(artifact_rate >= 0.0 && artifact_rate <= 1.0)) throw Error(ErrorCode::kConfig, "artifact_rate must lie in [0, 1]");
  if (!(hours_per_patient * 3600.0 >= kSlotSeconds) || !std::isfinite(hours_per_patient)) {
    throw Error(ErrorCode::kConfig, "hours_per_patient must cover at least one half-hour slot");
  }
  if (artifact_rate > 0.0 && artifact_kinds.empty()) throw Error(ErrorCode::kConfig, "artifact_kinds is empty");
  for (std::size_t i = 0; i < artifact_kinds.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (artifact_kinds[k] == artifact_kinds[i]) throw Error(ErrorCode::kConfig, "duplicate artifact kind");
    }
  }
}

int CohortSpec::slots_per_patient() const {
  return static_cast<int>(std::floor(hours_per_patient * 3600.0 / kSlotSeconds));
}

std::string synth_patient_id(int index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 3) digits.insert(0, 3 - digits.size(), '0');
  return "P" + digits;
}

SynthPatient generate_patient(const CohortSpec& spec, int index) {
  spec.validate();
  if (index < 0 || index >= spec.n_patients) throw Error(ErrorCode::kInvalidArgument, "patient index out of range");
  const auto ui = static_cast<std::uint64_t>(index);
  auto rng = derived_rng({spec.seed, 0x70617469, ui});
  const auto params = draw_params(rng);

  const int slots = spec.slots_per_patient();
  std::vector<AlertType> types;
  for (int s = 0; s < slots; ++s) types.push_back(s < slots / 2 ? AlertType::kRR : AlertType::kSpO2);
  if (slots % 2 == 1 && bernoulli(rng, 0.5)) types.back() = AlertType::kRR;
  shuffle(types, rng);

  std::vector<Episode> eps;
  for (int s = 0; s < slots; ++s) {
    auto slot_rng = derived_rng({spec.seed, ui, static_cast<std::uint64_t>(s), 0x736c6f74});
    eps.push_back(draw_episode(slot_rng, spec, types[static_cast<std::size_t>(s)], s * kSlotSeconds));
  }

  SynthPatient sp;
  sp.record.patient_id = synth_patient_id(index);
  auto num_rng = derived_rng({spec.seed, ui, 0x6e756d65});
  add_numerics(sp.record, params, eps, static_cast<std::int64_t>(slots * kSlotSeconds), num_rng);
  add_waveforms(sp.record, params, eps, spec.seed, index);

  for (std::size_t k = 0; k < eps.size(); ++k) {
    const auto& e = eps[k];
    if (e.kind) {
      const auto inj_seed = derived_rng({spec.seed, ui, k, 0x696e6a65})();
      sp.record = inject_artifact(std::move(sp.record), e.tau, e.ramp0, e.ramp1, *e.kind, inj_seed);
    }
    sp.plants.push_back({sp.record.patient_id, e.tau, e.ramp0, e.ramp1, e.artifact ? 1 : 0, e.kind, {}});
  }
  match_plants(sp, AlertCriteria{});
  return sp;
}

Cohort generate_cohort(const CohortSpec& spec) {
  spec.validate();
  std::vector<SynthPatient> patients(static_cast<std::size_t>(spec.n_patients));
  parallel_for(patients.size(), spec.workers,
               [&](std::size_t i) { patients[i] = generate_patient(spec, static_cast<int>(i)); });
  Cohort c;
  for (auto& p : patients) {
    c.records.push_back(std::move(p.record));
    c.labels.insert(c.labels.end(), p.labels.begin(), p.labels.end());
    c.plants.insert(c.plants.end(), p.plants.begin(), p.plants.end());
  }
  return c;
}

PatientRecord inject_artifact(PatientRecord record, AlertType tau, double start_s, double end_s,
                              ArtifactKind kind, std::uint64_t seed) {
  if (!(start_s >= 0.0) || !(end_s > start_s) || end_s > record_seconds(record)) {
    throw Error(ErrorCode::kInvalidArgument, "artifact interval outside the record", record.patient_id);
  }
  auto rng = derived_rng({seed});
  auto replace = [&](ChannelId id, Channel ch) { record.channels.insert_or_assign(id, std::move(ch)); };

  if (kind == ArtifactKind::kNumericWaveformMismatch) {
    const ChannelId id = tau == AlertType::kRR ? ChannelId::kRR : ChannelId::kHR;
    const Channel* ch = record.find(id);
    if (!ch) throw Error(ErrorCode::kInvalidArgument, "mismatch needs a numeric channel", std::string(channel_name(id)));
    const auto lo = index_at(start_s, ch->fs()), hi = index_at(end_s, ch->fs());
    const auto v = values_in(*ch, lo, hi);
    if (v.empty()) throw Error(ErrorCode::kInvalidArgument, "no numeric samples in the artifact interval");
    double factor = 1.0;
    if (tau == AlertType::kRR) {
      // Push a normal-range reading past the nearer threshold, or pull an
      // alarming one back into it, so the rate doubles or more than halves.
      const double med = stats::median(v);
      factor = med < 19.5 ? std::max(2.0, 36.0 / std::max(med, 1.0)) : std::min(0.45, 7.0 / med);
    } else {
      factor = bernoulli(rng, 0.5) ? 1.4 : 0.6;
    }
    replace(id, map_range(*ch, lo, hi, [&](std::span<double> xs) {
              for (auto& x : xs) x = round_to(x * factor, 0.1);
            }));
    return record;
  }

  std::vector<ChannelId> targets;
  if (tau == AlertType::kRR) {
    targets = {ChannelId::kResp};
  } else {
    targets = {ChannelId::kPleth, ChannelId::kPlethT};
  }
  bool any = false;
  for (const auto id : targets) {
    const Channel* ch = record.find(id);
    if (!ch) continue;
    any = true;
    replace(id, corrupt_waveform(*ch, index_at(start_s, ch->fs()), index_at(end_s, ch->fs()), kind, rng));
  }
  if (!any) throw Error(ErrorCode::kInvalidArgument, "record has no waveform to corrupt", record.patient_id);
  return record;
}

std::vector<std::filesystem::path> write_cohort(const Cohort& cohort, const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> manifests;
  for (const auto& r : cohort.records) manifests.push_back(write_patient_record(r, dir / r.patient_id));
  write_labels(cohort.labels, dir / "labels.csv");
  std::ofstream out(dir / "plants.csv");
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + (dir / "plants.csv").string());
  out << "patient_id,tau,start,end,y,kind,event_id\n";
  for (const auto& p : cohort.plants) {
    out << p.patient_id << ',' << alert_type_name(p.tau) << ',' << format_double(p.start) << ','
        << format_double(p.end) << ',' << p.y << ',' << (p.kind ? artifact_kind_name(*p.kind) : "") << ','
        << p.event_id << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + (dir / "plants.csv").string());
  return manifests;
}

std::vector<std::filesystem::path> find_manifests(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw Error(ErrorCode::kMissingFile, "no such directory", dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto m = entry.path() / "manifest.json";
    if (entry.is_directory() && std::filesystem::exists(m)) out.push_back(m);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace vitalws
