#include "vitalws/dsp.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <numeric>

#include <fftw3.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_interp.h>

#include "vitalws/error.hpp"
#include "vitalws/stats.hpp"

namespace vitalws::dsp {

namespace {

constexpr double kPi = std::numbers::pi;

// FFTW planning is not thread-safe; execution on distinct plans is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

void disable_gsl_abort() {
  static std::once_flag once;
  std::call_once(once, [] { gsl_set_error_handler_off(); });
}

}  // namespace

// ---------------------------------------------------------------------------
// Filters

std::vector<Biquad> butterworth(int order, double cutoff_hz, double fs, FilterType type) {
  if (order < 1) throw Error(ErrorCode::kInvalidArgument, "filter order must be >= 1");
  if (!(fs > 0.0) || !(cutoff_hz > 0.0) || !(cutoff_hz < fs / 2.0)) {
    throw Error(ErrorCode::kInvalidArgument, "cutoff must lie in (0, fs/2)");
  }
  const double k = 2.0 * fs;
  const double wc = k * std::tan(kPi * cutoff_hz / fs);
  const bool lowpass = type == FilterType::kLowPass;

  auto to_z = [&](std::complex<double> prototype) {
    const std::complex<double> s = lowpass ? wc * prototype : wc / prototype;
    return (k + s) / (k - s);
  };

  std::vector<Biquad> sections;
  for (int i = 0; i < order / 2; ++i) {
    const double theta = kPi * (2.0 * i + 1.0 + order) / (2.0 * order);
    const auto z = to_z(std::polar(1.0, theta));
    const double a1 = -2.0 * z.real();
    const double a2 = std::norm(z);
    if (lowpass) {
      const double g = (1.0 + a1 + a2) / 4.0;
      sections.push_back({g, 2.0 * g, g, a1, a2});
    } else {
      const double g = (1.0 - a1 + a2) / 4.0;
      sections.push_back({g, -2.0 * g, g, a1, a2});
    }
  }
  if (order % 2 == 1) {
    const double z = to_z({-1.0, 0.0}).real();
    if (lowpass) {
      const double g = (1.0 - z) / 2.0;
      sections.push_back({g, g, 0.0, -z, 0.0});
    } else {
      const double g = (1.0 + z) / 2.0;
      sections.push_back({g, -g, 0.0, -z, 0.0});
    }
  }
  return sections;
}

double magnitude_response(std::span<const Biquad> sections, double f_hz, double fs) {
  const std::complex<double> zinv = std::polar(1.0, -2.0 * kPi * f_hz / fs);
  const std::complex<double> zinv2 = zinv * zinv;
  double mag = 1.0;
  for (const auto& s : sections) {
    mag *= std::abs(s.b0 + s.b1 * zinv + s.b2 * zinv2) / std::abs(1.0 + s.a1 * zinv + s.a2 * zinv2);
  }
  return mag;
}

namespace {

using State = std::array<double, 2>;

// Steady-state section states for a unit step at the cascade input.
std::vector<State> steady_state(std::span<const Biquad> sections) {
  std::vector<State> zi;
  double level = 1.0;
  for (const auto& s : sections) {
    const double gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    zi.push_back({level * (gain - s.b0), level * (s.b2 - s.a2 * gain)});
    level *= gain;
  }
  return zi;
}

// Direct form II transposed, in place.
void run_cascade(std::span<const Biquad> sections, std::vector<State> state,
                 std::vector<double>& x) {
  for (std::size_t k = 0; k < sections.size(); ++k) {
    const auto& s = sections[k];
    double z1 = state[k][0];
    double z2 = state[k][1];
    for (double& v : x) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
}

}  // namespace

std::vector<double> filtfilt(std::span<const Biquad> sections, std::span<const double> x,
                             std::size_t pad, PadMode mode) {
  const std::size_t n = x.size();
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "filtfilt needs at least 2 samples");
  std::size_t zero_b2 = 0;
  std::size_t zero_a2 = 0;
  for (const auto& s : sections) {
    zero_b2 += s.b2 == 0.0;
    zero_a2 += s.a2 == 0.0;
  }
  const std::size_t ntaps = 2 * sections.size() + 1 - std::min(zero_b2, zero_a2);
  pad = std::min(pad == 0 ? 3 * ntaps : pad, n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  const bool odd = mode == PadMode::kOdd;
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(odd ? 2.0 * x[0] - x[i] : x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t j = 1; j <= pad; ++j) {
    ext.push_back(odd ? 2.0 * x[n - 1] - x[n - 1 - j] : x[n - 1 - j]);
  }

  const auto zi = steady_state(sections);
  auto scaled = [&](double level) {
    auto z = zi;
    for (auto& st : z) {
      st[0] *= level;
      st[1] *= level;
    }
    return z;
  };

  run_cascade(sections, scaled(ext.front()), ext);
  std::reverse(ext.begin(), ext.end());
  run_cascade(sections, scaled(ext.front()), ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

std::vector<double> detrend_linear(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> out(x.begin(), x.end());
  if (n == 0) return out;
  if (n == 1) {
    out[0] = 0.0;
    return out;
  }
  // Centred abscissa keeps the normal equations well conditioned.
  const double tc = (static_cast<double>(n) - 1.0) / 2.0;
  double sy = 0.0;
  double sty = 0.0;
  double stt = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) - tc;
    sy += x[i];
    sty += t * x[i];
    stt += t * t;
  }
  const double intercept = sy / static_cast<double>(n);
  const double slope = sty / stt;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = x[i] - (intercept + slope * (static_cast<double>(i) - tc));
  }
  return out;
}

std::vector<double> bohman_window(std::size_t n) {
  std::vector<double> w(n, 0.0);
  if (n == 1) w[0] = 1.0;
  if (n < 3) return w;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double f = std::abs(-1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1));
    w[i] = (1.0 - f) * std::cos(kPi * f) + std::sin(kPi * f) / kPi;
  }
  return w;
}

std::vector<double> preprocess_resp(std::span<const double> wave, double fs,
                                    const DspConfig& cfg) {
  if (wave.size() < 2) throw Error(ErrorCode::kInvalidArgument, "preprocess_resp needs >= 2 samples");
  if (!(fs > 2.0 * cfg.resp_cutoff_hz)) {
    throw Error(ErrorCode::kInvalidArgument, "sampling rate below twice the respiration cutoff");
  }
  const auto sections = butterworth(cfg.resp_filter_order, cfg.resp_cutoff_hz, fs, FilterType::kLowPass);
  // Mirror padding: an odd reflection about a non-zero end sample puts a step
  // into the pad that the low-pass carries back into the signal. The closing
  // detrend removes whatever slope remains.
  const auto pad = static_cast<std::size_t>(std::ceil(3.0 * fs / cfg.resp_cutoff_hz));
  return detrend_linear(filtfilt(sections, detrend_linear(wave), pad, PadMode::kEven));
}

// ---------------------------------------------------------------------------
// Peaks

namespace {

std::vector<std::size_t> local_maxima(std::span<const double> x) {
  std::vector<std::size_t> peaks;
  const std::size_t n = x.size();
  if (n < 3) return peaks;
  std::size_t i = 1;
  const std::size_t last = n - 1;
  while (i < last) {
    if (x[i - 1] < x[i]) {
      std::size_t ahead = i + 1;
      while (ahead < last && x[ahead] == x[i]) ++ahead;
      if (x[ahead] < x[i]) {
        peaks.push_back((i + ahead - 1) / 2);
        i = ahead;
      }
    }
    ++i;
  }
  return peaks;
}

}  // namespace

std::vector<double> peak_prominences(std::span<const double> wave,
                                     std::span<const std::size_t> peaks) {
  std::vector<double> out;
  out.reserve(peaks.size());
  const std::size_t n = wave.size();
  for (const std::size_t p : peaks) {
    const double h = wave[p];
    double left_min = h;
    for (std::size_t i = p + 1; i-- > 0;) {
      if (wave[i] > h) break;
      left_min = std::min(left_min, wave[i]);
    }
    double right_min = h;
    for (std::size_t i = p; i < n; ++i) {
      if (wave[i] > h) break;
      right_min = std::min(right_min, wave[i]);
    }
    out.push_back(h - std::max(left_min, right_min));
  }
  return out;
}

std::vector<std::size_t> detect_peaks(std::span<const double> wave, double fs,
                                      const PeakParams& params) {
  if (wave.size() < 3) return {};
  const auto [lo, hi] = std::minmax_element(wave.begin(), wave.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return {};

  const auto candidates = local_maxima(wave);
  const auto prominence = peak_prominences(wave, candidates);
  const double min_prominence = params.prominence_fraction * range;
  std::vector<std::size_t> peaks;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (prominence[i] >= min_prominence) peaks.push_back(candidates[i]);
  }

  const double distance = params.min_distance_s * fs;
  if (distance <= 1.0 || peaks.size() < 2) return peaks;

  // Taller peaks claim their neighbourhood first; ties go to the earlier one.
  std::vector<std::size_t> order(peaks.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return wave[peaks[a]] > wave[peaks[b]]; });
  std::vector<char> keep(peaks.size(), 1);
  for (const std::size_t j : order) {
    if (!keep[j]) continue;
    for (std::size_t k = j; k-- > 0;) {
      if (static_cast<double>(peaks[j] - peaks[k]) >= distance) break;
      keep[k] = 0;
    }
    for (std::size_t k = j + 1; k < peaks.size(); ++k) {
      if (static_cast<double>(peaks[k] - peaks[j]) >= distance) break;
      keep[k] = 0;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    if (keep[i]) out.push_back(peaks[i]);
  }
  return out;
}

double rate_from_peak_count(std::size_t peak_count, double window_s) {
  if (!(window_s > 0.0)) throw Error(ErrorCode::kInvalidArgument, "window must be positive");
  return static_cast<double>(peak_count) * 60.0 / window_s;
}

// ---------------------------------------------------------------------------
// Spectral

std::optional<double> rate_from_primary_harmonic(std::span<const double> wave, double fs,
                                                 const Band& band) {
  if (!(band.lo_hz >= 0.0) || !(band.lo_hz < band.hi_hz) || !(band.hi_hz <= fs / 2.0)) {
    throw Error(ErrorCode::kInvalidArgument, "band must satisfy 0 <= lo < hi <= fs/2");
  }
  const std::size_t n = wave.size();
  if (n < 64) return std::nullopt;

  const auto detrended = detrend_linear(wave);
  const auto window = bohman_window(n);
  const std::size_t nfft = std::bit_ceil(4 * n);

  double* in = fftw_alloc_real(nfft);
  fftw_complex* out = fftw_alloc_complex(nfft / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(nfft), in, out, FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < nfft; ++i) in[i] = i < n ? detrended[i] * window[i] : 0.0;
  fftw_execute(plan);

  const double df = fs / static_cast<double>(nfft);
  const auto first = static_cast<std::size_t>(std::ceil(band.lo_hz / df));
  const auto last = std::min(nfft / 2, static_cast<std::size_t>(std::floor(band.hi_hz / df)));
  std::size_t best = first;
  double best_power = -1.0;
  for (std::size_t k = first; k <= last; ++k) {
    const double power = out[k][0] * out[k][0] + out[k][1] * out[k][1];
    if (power > best_power) {
      best_power = power;
      best = k;
    }
  }
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);

  if (first > last || !(best_power > 0.0)) return std::nullopt;
  return 60.0 * static_cast<double>(best) * df;
}

// ---------------------------------------------------------------------------
// Extrema

std::optional<double> rate_from_extrema(std::span<const double> resp_wave, double fs,
                                        const DspConfig& cfg) {
  if (resp_wave.size() < 3) return std::nullopt;
  const auto y = preprocess_resp(resp_wave, fs, cfg);

  double scale = 0.0;
  for (const double v : resp_wave) scale = std::max(scale, std::abs(v));
  const double iqr = stats::quantile(y, 0.75) - stats::quantile(y, 0.25);
  if (!(iqr > cfg.flat_relative_iqr * scale) || !(iqr > 0.0)) return std::nullopt;

  struct Extremum {
    std::size_t index;
    bool is_max;
  };
  std::vector<Extremum> ext;
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    const bool is_max = y[i] > y[i - 1] && y[i] >= y[i + 1];
    const bool is_min = y[i] < y[i - 1] && y[i] <= y[i + 1];
    if (!is_max && !is_min) continue;
    if (!ext.empty() && ext.back().is_max == is_max) {
      // Same kind twice in a row: keep the more extreme one.
      const bool replace = is_max ? y[i] > y[ext.back().index] : y[i] < y[ext.back().index];
      if (replace) ext.back().index = i;
      continue;
    }
    ext.push_back({i, is_max});
  }

  const double floor = cfg.extrema_iqr_fraction * iqr;
  while (ext.size() >= 2) {
    std::size_t weakest = 0;
    double weakest_swing = std::abs(y[ext[1].index] - y[ext[0].index]);
    for (std::size_t k = 1; k + 1 < ext.size(); ++k) {
      const double swing = std::abs(y[ext[k + 1].index] - y[ext[k].index]);
      if (swing < weakest_swing) {
        weakest_swing = swing;
        weakest = k;
      }
    }
    if (weakest_swing >= floor) break;
    ext.erase(ext.begin() + static_cast<std::ptrdiff_t>(weakest),
              ext.begin() + static_cast<std::ptrdiff_t>(weakest + 2));
  }

  std::vector<std::size_t> maxima;
  for (const auto& e : ext) {
    if (e.is_max) maxima.push_back(e.index);
  }
  if (maxima.size() < 3) return std::nullopt;
  const double span = static_cast<double>(maxima.back() - maxima.front());
  return 60.0 * fs * static_cast<double>(maxima.size() - 1) / span;
}

// ---------------------------------------------------------------------------
// Pleth envelope

std::optional<std::vector<double>> derive_resp_from_pleth(std::span<const double> pleth, double fs,
                                                          const DspConfig& cfg) {
  if (pleth.size() < 3) return std::nullopt;
  const auto x = detrend_linear(pleth);
  const auto peaks = detect_peaks(x, fs, cfg.pleth_peaks);
  if (peaks.size() < 4) return std::nullopt;

  // Parabolic refinement of each tip.
  std::vector<double> knots_x;
  std::vector<double> knots_y;
  for (const std::size_t p : peaks) {
    double pos = static_cast<double>(p);
    double tip = x[p];
    if (p > 0 && p + 1 < x.size()) {
      const double y0 = x[p - 1];
      const double y1 = x[p];
      const double y2 = x[p + 1];
      const double denom = y0 - 2.0 * y1 + y2;
      if (denom < 0.0) {
        const double delta = 0.5 * (y0 - y2) / denom;
        pos += delta;
        tip = y1 - 0.25 * (y0 - y2) * delta;
      }
    }
    knots_x.push_back(pos);
    knots_y.push_back(tip);
  }

  disable_gsl_abort();
  gsl_interp* interp = gsl_interp_alloc(gsl_interp_cspline, knots_x.size());
  gsl_interp_accel* accel = gsl_interp_accel_alloc();
  if (interp == nullptr || accel == nullptr ||
      gsl_interp_init(interp, knots_x.data(), knots_y.data(), knots_x.size()) != GSL_SUCCESS) {
    if (accel != nullptr) gsl_interp_accel_free(accel);
    if (interp != nullptr) gsl_interp_free(interp);
    return std::nullopt;
  }
  const auto first = static_cast<std::int64_t>(std::ceil(knots_x.front()));
  const auto last = static_cast<std::int64_t>(std::floor(knots_x.back()));
  std::vector<double> envelope;
  envelope.reserve(static_cast<std::size_t>(std::max<std::int64_t>(0, last - first + 1)));
  for (std::int64_t i = first; i <= last; ++i) {
    double v = 0.0;
    gsl_interp_eval_e(interp, knots_x.data(), knots_y.data(), static_cast<double>(i), accel, &v);
    envelope.push_back(v);
  }
  gsl_interp_accel_free(accel);
  gsl_interp_free(interp);
  if (envelope.size() < 2) return std::nullopt;
  return envelope;
}

// ---------------------------------------------------------------------------
// ECG

std::optional<double> clean_ecg_and_rate(std::span<const double> ecg, double fs,
                                         const DspConfig& cfg) {
  if (static_cast<double>(ecg.size()) < 10.0 * fs) return std::nullopt;
  const auto hp = butterworth(5, cfg.ecg_highpass_hz, fs, FilterType::kHighPass);
  auto cleaned = filtfilt(hp, detrend_linear(ecg));

  const auto width = static_cast<std::size_t>(std::lround(fs / cfg.powerline_hz));
  if (width > 1) {
    std::vector<double> prefix(cleaned.size() + 1, 0.0);
    for (std::size_t i = 0; i < cleaned.size(); ++i) prefix[i + 1] = prefix[i] + cleaned[i];
    const std::size_t half = width / 2;
    std::vector<double> smoothed(cleaned.size());
    for (std::size_t i = 0; i < cleaned.size(); ++i) {
      const std::size_t lo = i >= half ? i - half : 0;
      const std::size_t hi = std::min(cleaned.size(), lo + width);
      smoothed[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
    }
    cleaned = std::move(smoothed);
  }

  const auto peaks = detect_peaks(cleaned, fs, cfg.ecg_peaks);
  if (peaks.size() < 2) return std::nullopt;
  std::vector<double> rates;
  rates.reserve(peaks.size() - 1);
  for (std::size_t i = 1; i < peaks.size(); ++i) {
    rates.push_back(60.0 * fs / static_cast<double>(peaks[i] - peaks[i - 1]));
  }
  return stats::median(rates);
}

// ---------------------------------------------------------------------------

double amplitude_metric(std::span<const double> wave, double fs, const PeakParams& params) {
  if (wave.empty()) throw Error(ErrorCode::kEmptyInput, "amplitude_metric of an empty wave");
  const auto peaks = detect_peaks(wave, fs, params);
  if (peaks.size() < 2) return 0.0;
  std::vector<double> swings;
  swings.reserve(peaks.size() - 1);
  for (std::size_t k = 0; k + 1 < peaks.size(); ++k) {
    const auto begin = wave.begin() + static_cast<std::ptrdiff_t>(peaks[k]);
    const auto end = wave.begin() + static_cast<std::ptrdiff_t>(peaks[k + 1]);
    swings.push_back(wave[peaks[k]] - *std::min_element(begin, end));
  }
  return stats::median(swings);
}

RespEstimates estimate_resp(std::span<const double> resp, double fs, const DspConfig& cfg) {
  RespEstimates est;
  if (resp.size() < 64) return est;
  const auto y = preprocess_resp(resp, fs, cfg);
  const double window_s = static_cast<double>(resp.size()) / fs;
  est.peak_rate = rate_from_peak_count(detect_peaks(y, fs, cfg.resp_peaks).size(), window_s);
  est.fft_rate = rate_from_primary_harmonic(y, fs, cfg.rr_band);
  est.extrema_rate = rate_from_extrema(resp, fs, cfg);
  est.height = amplitude_metric(y, fs, cfg.resp_peaks);
  return est;
}

PlethEstimates estimate_pleth(std::span<const double> pleth, double fs, const DspConfig& cfg) {
  PlethEstimates est;
  if (pleth.size() < 64) return est;
  const auto x = detrend_linear(pleth);
  const double window_s = static_cast<double>(pleth.size()) / fs;
  est.hr_peaks = rate_from_peak_count(detect_peaks(x, fs, cfg.pleth_peaks).size(), window_s);
  est.hr_fft = rate_from_primary_harmonic(x, fs, cfg.hr_band);
  est.pulsatility = amplitude_metric(x, fs, cfg.pleth_peaks);
  if (const auto envelope = derive_resp_from_pleth(pleth, fs, cfg)) {
    if (envelope->size() >= 64) est.rr_fft = rate_from_primary_harmonic(*envelope, fs, cfg.rr_band);
    est.rr_extrema = rate_from_extrema(*envelope, fs, cfg);
    est.envelope_height = amplitude_metric(preprocess_resp(*envelope, fs, cfg), fs, cfg.resp_peaks);
  }
  return est;
}

DerivedEstimates compute_estimates(const WindowView& view, const DspConfig& cfg) {
  DerivedEstimates est;
  if (const auto* ch = view.find(ChannelId::kResp)) est.resp = estimate_resp(ch->longest_run(), ch->fs(), cfg);
  if (const auto* ch = view.find(ChannelId::kPleth)) est.pleth = estimate_pleth(ch->longest_run(), ch->fs(), cfg);
  if (const auto* ch = view.find(ChannelId::kPlethT)) est.pleth_t = estimate_pleth(ch->longest_run(), ch->fs(), cfg);
  if (const auto* ch = view.find(ChannelId::kEcgII)) est.hr_ecg_ii = clean_ecg_and_rate(ch->longest_run(), ch->fs(), cfg);
  if (const auto* ch = view.find(ChannelId::kEcgIII)) est.hr_ecg_iii = clean_ecg_and_rate(ch->longest_run(), ch->fs(), cfg);
  return est;
}

}  // namespace vitalws::dsp
