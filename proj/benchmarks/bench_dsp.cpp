#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "vitalws/dsp.hpp"

namespace {

using namespace vitalws::dsp;

// One 60 s analysis window of a pulse-like wave with breathing modulation.
std::vector<double> wave(double fs, double rate_hz, double breath_hz) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 0.02);
  std::vector<double> x(static_cast<std::size_t>(60.0 * fs));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = static_cast<double>(i) / fs;
    const double phase = std::fmod(t * rate_hz, 1.0);
    x[i] = (1.0 + 0.2 * std::sin(2 * std::numbers::pi * breath_hz * t)) * std::exp(-std::pow((phase - 0.3) / 0.09, 2)) +
           noise(rng);
  }
  return x;
}

void BM_PreprocessResp(benchmark::State& state) {
  const auto x = wave(62.5, 0.25, 0.02);
  for (auto _ : state) benchmark::DoNotOptimize(preprocess_resp(x, 62.5));
}
BENCHMARK(BM_PreprocessResp);

void BM_DetectPeaks(benchmark::State& state) {
  const auto x = wave(125.0, 1.2, 0.25);
  for (auto _ : state) benchmark::DoNotOptimize(detect_peaks(x, 125.0, PeakParams{0.3, 0.3}));
}
BENCHMARK(BM_DetectPeaks);

void BM_PrimaryHarmonic(benchmark::State& state) {
  const auto x = wave(static_cast<double>(state.range(0)), 1.2, 0.25);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rate_from_primary_harmonic(x, static_cast<double>(state.range(0)), Band{0.5, 3.0}));
  }
}
BENCHMARK(BM_PrimaryHarmonic)->Arg(125)->Arg(250);

void BM_EstimatePleth(benchmark::State& state) {
  const auto x = wave(125.0, 1.2, 0.25);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_pleth(x, 125.0));
}
BENCHMARK(BM_EstimatePleth);

void BM_EcgRate(benchmark::State& state) {
  const auto x = wave(250.0, 1.2, 0.25);
  for (auto _ : state) benchmark::DoNotOptimize(clean_ecg_and_rate(x, 250.0));
}
BENCHMARK(BM_EcgRate);

}  // namespace
