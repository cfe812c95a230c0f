#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "signals.hpp"
#include "vitalws/dsp.hpp"
#include "vitalws/error.hpp"

namespace vitalws::dsp {
namespace {

using vitalws::testing::analytic_lowpass;
using vitalws::testing::ecg_spikes;
using vitalws::testing::pulse_train;
using vitalws::testing::sinusoid;
using vitalws::testing::tone_amplitude;
using vitalws::testing::white_noise;

constexpr double kRespFs = 62.5;
constexpr double kPlethFs = 125.0;
constexpr double kEcgFs = 250.0;

double ls_slope(const std::vector<double>& y) {
  const double n = static_cast<double>(y.size());
  const double tc = (n - 1.0) / 2.0;
  double sty = 0.0;
  double stt = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double t = static_cast<double>(i) - tc;
    sty += t * y[i];
    stt += t * t;
  }
  return sty / stt;
}

// Brute-force reference: local maxima by definition, prominence by scanning
// to the nearest strictly higher sample, greedy tallest-first thinning.
std::vector<std::size_t> brute_force_peaks(const std::vector<double>& x, double min_distance,
                                           double prominence_fraction) {
  const double range = *std::max_element(x.begin(), x.end()) - *std::min_element(x.begin(), x.end());
  std::vector<std::size_t> cand;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if (x[i] > x[i - 1] && x[i] > x[i + 1]) cand.push_back(i);
  }
  std::vector<std::size_t> prominent;
  for (const auto p : cand) {
    double left = x[p];
    for (std::size_t j = p; j-- > 0 && x[j] <= x[p];) left = std::min(left, x[j]);
    double right = x[p];
    for (std::size_t j = p + 1; j < x.size() && x[j] <= x[p]; ++j) right = std::min(right, x[j]);
    if (x[p] - std::max(left, right) >= prominence_fraction * range) prominent.push_back(p);
  }
  std::vector<std::size_t> by_height = prominent;
  std::stable_sort(by_height.begin(), by_height.end(),
                   [&](auto a, auto b) { return x[a] > x[b]; });
  std::vector<std::size_t> kept;
  for (const auto p : by_height) {
    bool clash = false;
    for (const auto q : kept) {
      const double d = p > q ? static_cast<double>(p - q) : static_cast<double>(q - p);
      if (d < min_distance) clash = true;
    }
    if (!clash) kept.push_back(p);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

TEST(Butterworth, MatchesAnalyticMagnitude) {
  const auto sos = butterworth(5, 2.0, kRespFs, FilterType::kLowPass);
  ASSERT_EQ(sos.size(), 3u);
  for (double f : {0.0, 0.3, 1.0, 2.0, 5.0, 10.0, 20.0}) {
    const double expected = analytic_lowpass(f, 2.0, kRespFs, 5);
    EXPECT_NEAR(magnitude_response(sos, f, kRespFs), expected, 1e-9 * std::max(1.0, expected))
        << "f=" << f;
  }
  EXPECT_NEAR(magnitude_response(sos, 2.0, kRespFs), 1.0 / std::sqrt(2.0), 1e-12);
}

TEST(Butterworth, HighPassBlocksDc) {
  const auto sos = butterworth(5, 0.5, kEcgFs, FilterType::kHighPass);
  EXPECT_NEAR(magnitude_response(sos, 0.0, kEcgFs), 0.0, 1e-12);
  EXPECT_NEAR(magnitude_response(sos, kEcgFs / 2.0, kEcgFs), 1.0, 1e-9);
}

TEST(Butterworth, RejectsCutoffAboveNyquist) {
  EXPECT_THROW(butterworth(5, 40.0, kRespFs, FilterType::kLowPass), Error);
}

TEST(PreprocessResp, ConstantBecomesZero) {
  const std::vector<double> x(600, 3.7);
  for (const double v : preprocess_resp(x, kRespFs)) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(PreprocessResp, PassbandToneKeepsAmplitude) {
  const auto x = sinusoid(0.3, kRespFs, 60.0, 1.0);
  const auto y = preprocess_resp(x, kRespFs);
  ASSERT_EQ(y.size(), x.size());
  const double expected = std::pow(analytic_lowpass(0.3, 2.0, kRespFs, 5), 2);
  EXPECT_NEAR(tone_amplitude(y, 0.3, kRespFs), expected, 0.02 * expected);
}

TEST(PreprocessResp, StopbandToneAttenuatedBy60Db) {
  const auto x = sinusoid(10.0, kRespFs, 60.0, 1.0);
  const auto y = preprocess_resp(x, kRespFs);
  const double measured_db = -20.0 * std::log10(std::max(tone_amplitude(y, 10.0, kRespFs), 1e-300));
  const double analytic_db = -20.0 * std::log10(std::pow(analytic_lowpass(10.0, 2.0, kRespFs, 5), 2));
  EXPECT_GE(analytic_db, 60.0);
  EXPECT_GE(measured_db, 60.0);
}

TEST(PreprocessResp, OutputHasNoLinearTrend) {
  for (unsigned seed = 0; seed < 10; ++seed) {
    auto x = white_noise(2000, seed);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += 0.01 * static_cast<double>(i);
    const auto y = preprocess_resp(x, kRespFs);
    const double scale = *std::max_element(y.begin(), y.end()) - *std::min_element(y.begin(), y.end());
    EXPECT_LT(std::abs(ls_slope(y)), 1e-9 * scale);
  }
}

TEST(PreprocessResp, TooFewSamples) {
  const std::vector<double> one{1.0};
  EXPECT_THROW(preprocess_resp(one, kRespFs), Error);
}

TEST(DetectPeaks, OnePeakPerCycle) {
  const auto x = sinusoid(0.25, kRespFs, 60.0);
  EXPECT_EQ(detect_peaks(x, kRespFs, {1.0, 0.2}).size(), 15u);
}

TEST(DetectPeaks, ConstantHasNone) {
  const std::vector<double> x(500, 2.0);
  EXPECT_TRUE(detect_peaks(x, kRespFs, {1.0, 0.2}).empty());
}

TEST(DetectPeaks, IgnoresLowProminenceRipple) {
  auto x = sinusoid(1.2, kPlethFs, 30.0);
  const auto ripple = sinusoid(10.0, kPlethFs, 30.0, 0.05);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += ripple[i];
  const auto peaks = detect_peaks(x, kPlethFs, {0.3, 0.3});
  EXPECT_EQ(peaks, brute_force_peaks(x, 0.3 * kPlethFs, 0.3));
  EXPECT_EQ(peaks.size(), 36u);
  for (std::size_t i = 1; i < peaks.size(); ++i) {
    // The ripple can move each crest by up to half its own period.
    EXPECT_NEAR(static_cast<double>(peaks[i] - peaks[i - 1]), kPlethFs / 1.2, kPlethFs / 10.0);
  }
}

TEST(DetectPeaks, MatchesBruteForceOnNoise) {
  for (unsigned seed = 0; seed < 20; ++seed) {
    const auto x = white_noise(400, seed);
    EXPECT_EQ(detect_peaks(x, 10.0, {0.5, 0.3}), brute_force_peaks(x, 5.0, 0.3)) << seed;
  }
}

TEST(RateFromPeakCount, Arithmetic) {
  EXPECT_DOUBLE_EQ(rate_from_peak_count(15, 60.0), 15.0);
  EXPECT_DOUBLE_EQ(rate_from_peak_count(0, 60.0), 0.0);
  EXPECT_DOUBLE_EQ(rate_from_peak_count(36, 30.0), 72.0);
  EXPECT_THROW(rate_from_peak_count(1, 0.0), Error);
}

TEST(PrimaryHarmonic, RespTone) {
  const auto x = sinusoid(0.3, kRespFs, 60.0);
  const auto rate = rate_from_primary_harmonic(x, kRespFs, {0.05, 1.0});
  ASSERT_TRUE(rate);
  EXPECT_NEAR(*rate, 18.0, 0.5);
}

TEST(PrimaryHarmonic, PulseTrain) {
  const auto x = pulse_train(1.2, kPlethFs, 60.0);
  const auto rate = rate_from_primary_harmonic(x, kPlethFs, {0.5, 3.0});
  ASSERT_TRUE(rate);
  EXPECT_NEAR(*rate, 72.0, 1.0);
}

TEST(PrimaryHarmonic, NoiseIsDeterministicAndInBand) {
  const auto x = white_noise(3750, 11);
  const auto a = rate_from_primary_harmonic(x, kRespFs, {0.05, 1.0});
  const auto b = rate_from_primary_harmonic(x, kRespFs, {0.05, 1.0});
  ASSERT_TRUE(a && b);
  EXPECT_EQ(*a, *b);
  EXPECT_GE(*a, 0.05 * 60.0);
  EXPECT_LE(*a, 1.0 * 60.0);
}

TEST(PrimaryHarmonic, WithinOneBinOfPureTone) {
  for (double f : {0.11, 0.2, 0.37, 0.5, 0.83}) {
    const auto x = sinusoid(f, kRespFs, 60.0, 1.0, 0.3);
    const auto rate = rate_from_primary_harmonic(x, kRespFs, {0.05, 1.0});
    ASSERT_TRUE(rate);
    const double bin = kRespFs / static_cast<double>(x.size());
    EXPECT_NEAR(*rate / 60.0, f, bin) << f;
  }
}

TEST(PrimaryHarmonic, Errors) {
  const auto x = sinusoid(0.3, kRespFs, 0.5);
  EXPECT_FALSE(rate_from_primary_harmonic(x, kRespFs, {0.05, 1.0}));
  const auto y = sinusoid(0.3, kRespFs, 60.0);
  EXPECT_THROW(rate_from_primary_harmonic(y, kRespFs, {1.0, 0.5}), Error);
  EXPECT_THROW(rate_from_primary_harmonic(y, kRespFs, {0.5, 40.0}), Error);
}

TEST(Extrema, PureTone) {
  const auto x = sinusoid(0.3, kRespFs, 60.0);
  const auto rate = rate_from_extrema(x, kRespFs);
  ASSERT_TRUE(rate);
  EXPECT_NEAR(*rate, 18.0, 1.0);
}

TEST(Extrema, AmplitudeJitter) {
  // Each breath gets its own amplitude in [0.8, 1.2].
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> amp(0.8, 1.2);
  const double f = 0.3;
  const auto n = static_cast<std::size_t>(60.0 * kRespFs);
  std::vector<double> amps(20);
  for (auto& a : amps) a = amp(rng);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kRespFs;
    x[i] = amps[static_cast<std::size_t>(t * f)] * std::sin(2.0 * std::numbers::pi * f * t);
  }
  // Brute-force reference: count maxima of the noise-free signal.
  std::size_t maxima = 0;
  std::size_t first = 0;
  std::size_t last = 0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (x[i] > x[i - 1] && x[i] >= x[i + 1] && x[i] > 0.0) {
      if (maxima == 0) first = i;
      last = i;
      ++maxima;
    }
  }
  const double reference = 60.0 * kRespFs * static_cast<double>(maxima - 1) / static_cast<double>(last - first);
  const auto rate = rate_from_extrema(x, kRespFs);
  ASSERT_TRUE(rate);
  EXPECT_NEAR(*rate, 18.0, 2.0);
  EXPECT_NEAR(*rate, reference, 1.0);
}

TEST(Extrema, FlatLineIsAbsent) {
  const std::vector<double> x(3750, 0.5);
  EXPECT_FALSE(rate_from_extrema(x, kRespFs));
}

TEST(PlethEnvelope, RecoversModulationRate) {
  const auto x = pulse_train(1.2, kPlethFs, 60.0, 0.05, 0.25, 0.2);
  const auto env = derive_resp_from_pleth(x, kPlethFs);
  ASSERT_TRUE(env);
  const auto rr = rate_from_primary_harmonic(*env, kPlethFs, {0.05, 1.0});
  ASSERT_TRUE(rr);
  EXPECT_NEAR(*rr, 15.0, 2.0);
  const auto rr_extrema = rate_from_extrema(*env, kPlethFs);
  ASSERT_TRUE(rr_extrema);
  EXPECT_NEAR(*rr_extrema, 15.0, 2.0);
}

TEST(PlethEnvelope, UnmodulatedTrainHasNoBreathing) {
  const auto x = pulse_train(1.2, kPlethFs, 60.0);
  const auto env = derive_resp_from_pleth(x, kPlethFs);
  ASSERT_TRUE(env);
  const auto rr = rate_from_extrema(*env, kPlethFs);
  EXPECT_TRUE(!rr || *rr < 1.0);
}

TEST(PlethEnvelope, ThreePeaksIsAbsent) {
  const auto x = pulse_train(1.0, kPlethFs, 3.0);
  EXPECT_FALSE(derive_resp_from_pleth(x, kPlethFs));
}

TEST(Ecg, SpikeTrainRate) {
  const auto x = ecg_spikes(1.2, kEcgFs, 60.0);
  const auto hr = clean_ecg_and_rate(x, kEcgFs);
  ASSERT_TRUE(hr);
  EXPECT_NEAR(*hr, 72.0, 1.0);
}

TEST(Ecg, BaselineWander) {
  auto x = ecg_spikes(1.2, kEcgFs, 60.0);
  const auto wander = sinusoid(0.1, kEcgFs, 60.0, 0.8);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += wander[i];
  const auto hr = clean_ecg_and_rate(x, kEcgFs);
  ASSERT_TRUE(hr);
  EXPECT_NEAR(*hr, 72.0, 2.0);
}

TEST(Ecg, TooShort) {
  const auto x = ecg_spikes(1.2, kEcgFs, 5.0);
  EXPECT_FALSE(clean_ecg_and_rate(x, kEcgFs));
}

TEST(Amplitude, SineSwingIsTwiceAmplitude) {
  const auto x = sinusoid(0.3, kRespFs, 60.0, 1.7);
  EXPECT_NEAR(amplitude_metric(x, kRespFs, {1.0, 0.2}), 3.4, 0.01);
}

TEST(Amplitude, FlatIsZero) {
  const std::vector<double> x(1000, 1.0);
  EXPECT_EQ(amplitude_metric(x, kRespFs, {1.0, 0.2}), 0.0);
}

TEST(Amplitude, AlternatingCyclesUseMedianMidpoint) {
  // One cycle per second; amplitudes alternate 1, 3.
  const auto n = static_cast<std::size_t>(20.0 * kPlethFs);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kPlethFs;
    const double a = (static_cast<std::size_t>(t) % 2 == 0) ? 1.0 : 3.0;
    x[i] = a * std::sin(2.0 * std::numbers::pi * t);
  }
  const PeakParams params{0.3, 0.2};
  // Brute-force per-cycle swing list from the detected peaks.
  const auto peaks = detect_peaks(x, kPlethFs, params);
  ASSERT_GE(peaks.size(), 4u);
  std::vector<double> swings;
  for (std::size_t k = 0; k + 1 < peaks.size(); ++k) {
    double lo = x[peaks[k]];
    for (std::size_t i = peaks[k]; i < peaks[k + 1]; ++i) lo = std::min(lo, x[i]);
    swings.push_back(x[peaks[k]] - lo);
  }
  std::sort(swings.begin(), swings.end());
  const double reference = swings.size() % 2 == 1
                               ? swings[swings.size() / 2]
                               : 0.5 * (swings[swings.size() / 2 - 1] + swings[swings.size() / 2]);
  const double m = amplitude_metric(x, kPlethFs, params);
  EXPECT_DOUBLE_EQ(m, reference);
  EXPECT_NEAR(m, 4.0, 0.05);
}

// -- properties ------------------------------------------------------------

TEST(DspProperties, AmplitudeScaleInvariance) {
  const auto resp = sinusoid(0.27, kRespFs, 60.0, 0.9, 0.4);
  const auto pleth = pulse_train(1.3, kPlethFs, 60.0, 0.05, 0.3, 0.2);
  const auto ecg = ecg_spikes(1.1, kEcgFs, 30.0);
  const DspConfig cfg;
  for (double c : {0.25, 2.0, 8.0}) {
    auto scale = [c](std::vector<double> v) {
      for (auto& x : v) x *= c;
      return v;
    };
    const auto r0 = estimate_resp(resp, kRespFs, cfg);
    const auto r1 = estimate_resp(scale(resp), kRespFs, cfg);
    EXPECT_EQ(r0.peak_rate, r1.peak_rate);
    EXPECT_EQ(r0.fft_rate, r1.fft_rate);
    EXPECT_EQ(r0.extrema_rate, r1.extrema_rate);
    ASSERT_TRUE(r0.height && r1.height);
    EXPECT_EQ(*r1.height, c * *r0.height);

    const auto p0 = estimate_pleth(pleth, kPlethFs, cfg);
    const auto p1 = estimate_pleth(scale(pleth), kPlethFs, cfg);
    EXPECT_EQ(p0.hr_peaks, p1.hr_peaks);
    EXPECT_EQ(p0.hr_fft, p1.hr_fft);
    EXPECT_EQ(p0.rr_fft, p1.rr_fft);
    EXPECT_EQ(p0.rr_extrema, p1.rr_extrema);
    ASSERT_TRUE(p0.pulsatility && p1.pulsatility);
    EXPECT_EQ(*p1.pulsatility, c * *p0.pulsatility);

    EXPECT_EQ(clean_ecg_and_rate(ecg, kEcgFs), clean_ecg_and_rate(scale(ecg), kEcgFs));
  }
}

TEST(DspProperties, CircularShiftInvariance) {
  const auto resp = sinusoid(0.3, kRespFs, 60.0);
  const auto pleth = pulse_train(1.2, kPlethFs, 60.0);
  for (std::size_t shift : {7u, 100u, 1234u}) {
    auto r = resp;
    std::rotate(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(shift), r.end());
    auto p = pleth;
    std::rotate(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(shift), p.end());

    const auto a = *rate_from_primary_harmonic(resp, kRespFs, {0.05, 1.0});
    const auto b = *rate_from_primary_harmonic(r, kRespFs, {0.05, 1.0});
    EXPECT_NEAR(a, b, 60.0 * kRespFs / static_cast<double>(resp.size()));

    const auto pa = detect_peaks(pleth, kPlethFs, {0.3, 0.3}).size();
    const auto pb = detect_peaks(p, kPlethFs, {0.3, 0.3}).size();
    EXPECT_LE(pa > pb ? pa - pb : pb - pa, 1u);

    const auto ea = *rate_from_extrema(resp, kRespFs);
    const auto eb = *rate_from_extrema(r, kRespFs);
    EXPECT_NEAR(ea, eb, 1.0);
  }
}

TEST(DspProperties, Deterministic) {
  const auto pleth = pulse_train(1.25, kPlethFs, 60.0, 0.05, 0.3, 0.2);
  const auto a = estimate_pleth(pleth, kPlethFs);
  const auto b = estimate_pleth(pleth, kPlethFs);
  EXPECT_EQ(a.hr_fft, b.hr_fft);
  EXPECT_EQ(a.rr_extrema, b.rr_extrema);
  EXPECT_EQ(a.envelope_height, b.envelope_height);
}

}  // namespace
}  // namespace vitalws::dsp
