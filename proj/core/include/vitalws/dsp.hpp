#pragma once

// Waveform-derived vital-sign estimators.
//
// Every estimator is a pure function of its input. Insufficient data yields
// std::nullopt, never NaN.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "vitalws/data_model.hpp"

namespace vitalws::dsp {

struct PeakParams {
  double min_distance_s = 1.0;
  /// Minimum topographic prominence as a fraction of (max - min).
  double prominence_fraction = 0.2;
};

struct Band {
  double lo_hz = 0.0;
  double hi_hz = 0.0;
};

struct DspConfig {
  PeakParams resp_peaks{1.0, 0.2};
  PeakParams pleth_peaks{0.3, 0.3};
  PeakParams ecg_peaks{0.25, 0.4};
  Band rr_band{0.05, 1.0};
  Band hr_band{0.5, 3.0};
  int resp_filter_order = 5;
  double resp_cutoff_hz = 2.0;
  double ecg_highpass_hz = 0.5;
  double powerline_hz = 50.0;
  /// Extremum pairs must swing at least this fraction of the IQR.
  double extrema_iqr_fraction = 0.2;
  /// Below this IQR (relative to max |x| of the input) a signal is treated as flat.
  double flat_relative_iqr = 1e-3;
};

enum class FilterType { kLowPass, kHighPass };

/// One second-order section, a0 normalised to 1. First-order sections have
/// b2 = a2 = 0.
struct Biquad {
  double b0, b1, b2, a1, a2;
};

/// Digital Butterworth design via the bilinear transform with prewarping.
std::vector<Biquad> butterworth(int order, double cutoff_hz, double fs, FilterType type);

/// |H(e^{j 2 pi f / fs})| of a cascade.
double magnitude_response(std::span<const Biquad> sections, double f_hz, double fs);

enum class PadMode { kOdd, kEven };

/// Zero-phase forward-backward filtering with reflected padding and
/// steady-state initial conditions. `pad` of 0 picks 3 x (filter taps).
std::vector<double> filtfilt(std::span<const Biquad> sections, std::span<const double> x,
                             std::size_t pad = 0, PadMode mode = PadMode::kOdd);

/// Removes the least-squares line.
std::vector<double> detrend_linear(std::span<const double> x);

std::vector<double> bohman_window(std::size_t n);

/// Linear detrend followed by an order-5, 2 Hz zero-phase Butterworth low-pass.
/// Throws kInvalidArgument for fewer than 2 samples or fs <= 2 * cutoff.
std::vector<double> preprocess_resp(std::span<const double> wave, double fs,
                                    const DspConfig& cfg = {});

/// Local maxima with prominence >= fraction * range, then thinned so that
/// kept peaks are at least min_distance apart (taller peaks win). Ascending.
std::vector<std::size_t> detect_peaks(std::span<const double> wave, double fs,
                                      const PeakParams& params);

/// Topographic prominence of each given peak.
std::vector<double> peak_prominences(std::span<const double> wave,
                                     std::span<const std::size_t> peaks);

double rate_from_peak_count(std::size_t peak_count, double window_s);

/// 60 * frequency of the tallest Bohman-windowed periodogram bin inside the
/// band. The signal is zero-padded to at least 4x its length.
std::optional<double> rate_from_primary_harmonic(std::span<const double> wave, double fs,
                                                 const Band& band);

/// Breath rate from alternating extrema of the preprocessed respiration
/// signal. Pairs whose swing is under the noise floor are merged away.
std::optional<double> rate_from_extrema(std::span<const double> resp_wave, double fs,
                                        const DspConfig& cfg = {});

/// Cubic-spline envelope through the pulse peak tips, sampled at every
/// index between the first and last peak.
std::optional<std::vector<double>> derive_resp_from_pleth(std::span<const double> pleth, double fs,
                                                          const DspConfig& cfg = {});

/// Cleans the ECG (0.5 Hz high-pass, powerline moving average), finds R
/// peaks, returns the median instantaneous heart rate.
std::optional<double> clean_ecg_and_rate(std::span<const double> ecg, double fs,
                                         const DspConfig& cfg = {});

/// Median peak-to-next-trough swing over detected cycles; 0 without cycles.
double amplitude_metric(std::span<const double> wave, double fs, const PeakParams& params);

struct RespEstimates {
  std::optional<double> peak_rate;     // breaths/min
  std::optional<double> fft_rate;      // respFFT
  std::optional<double> extrema_rate;  // respNK1
  std::optional<double> height;        // respHeight
};

struct PlethEstimates {
  std::optional<double> hr_peaks;         // plethINT
  std::optional<double> hr_fft;           // plethFFT
  std::optional<double> pulsatility;      // pulsatility
  std::optional<double> rr_fft;           // RR from the envelope's primary harmonic
  std::optional<double> rr_extrema;       // plethNK1
  std::optional<double> envelope_height;  // plethHeight
};

struct DerivedEstimates {
  RespEstimates resp;
  PlethEstimates pleth;
  PlethEstimates pleth_t;
  std::optional<double> hr_ecg_ii;
  std::optional<double> hr_ecg_iii;
};

RespEstimates estimate_resp(std::span<const double> resp, double fs, const DspConfig& cfg = {});
PlethEstimates estimate_pleth(std::span<const double> pleth, double fs, const DspConfig& cfg = {});

/// Runs every estimator whose source channel is in the view. Each waveform
/// contributes its longest gap-free run.
DerivedEstimates compute_estimates(const WindowView& view, const DspConfig& cfg = {});

}  // namespace vitalws::dsp
