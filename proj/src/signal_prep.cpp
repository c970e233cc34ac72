#include "oscl/signal_prep.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <mutex>
#include <numbers>
#include <numeric>

#include <fftw3.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "oscl/errors.hpp"
#include "oscl/parallel.hpp"

namespace oscl {

namespace {

constexpr double kPi = std::numbers::pi;

// FFTW's planner is not re-entrant.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

std::vector<std::complex<double>> real_fft(std::vector<double> padded) {
  const auto n = padded.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), padded.data(),
                                reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  if (n == 1) {
    w[0] = 1.0;
    return w;
  }
  for (std::size_t k = 0; k < n; ++k) {
    w[k] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(k) / static_cast<double>(n - 1));
  }
  return w;
}

std::complex<double> section_response(const std::array<double, 6>& s, std::complex<double> zinv) {
  const auto num = s[0] + zinv * (s[1] + zinv * s[2]);
  const auto den = s[3] + zinv * (s[4] + zinv * s[5]);
  return num / den;
}

double pole_magnitude(const std::array<double, 6>& s) { return std::sqrt(std::abs(s[5])); }

std::array<double, 6> section_from_pole(std::complex<double> z, double b0, double b1, double b2) {
  return {b0, b1, b2, 1.0, -2.0 * z.real(), std::norm(z)};
}

void validate_edges(const std::vector<double>& edges, double fs) {
  for (double e : edges) {
    if (!(e > 0.0 && e < fs / 2.0)) {
      throw DesignError(fmt::format("corner frequency {} Hz is outside (0, {}) Hz", e, fs / 2.0));
    }
  }
}

}  // namespace

Periodogram periodogram(std::span<const double> x, double sample_rate) {
  if (x.size() < 2) throw LengthError("periodogram needs at least 2 samples");
  const auto n = x.size();
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const auto w = hann(n);
  const auto nfft = std::bit_ceil(4 * n);
  std::vector<double> padded(nfft, 0.0);
  for (std::size_t k = 0; k < n; ++k) padded[k] = (x[k] - mean) * w[k];

  Periodogram p;
  p.window_sum = std::accumulate(w.begin(), w.end(), 0.0);
  p.window_energy = std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
  p.resolution_hz = sample_rate / static_cast<double>(nfft);
  const auto spectrum = real_fft(std::move(padded));
  const double scale = 1.0 / (sample_rate * p.window_energy);
  p.power.resize(spectrum.size());
  p.frequency_hz.resize(spectrum.size());
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    const bool edge = k == 0 || k == nfft / 2;
    p.power[k] = (edge ? 1.0 : 2.0) * std::norm(spectrum[k]) * scale;
    p.frequency_hz[k] = static_cast<double>(k) * p.resolution_hz;
  }
  return p;
}

SpectralPeak detect_dominant_frequency(std::span<const std::vector<double>> signals,
                                       double sample_rate, Band band) {
  if (signals.empty()) throw DataError("no signals for spectral peak detection");
  if (!(band.first > 0.0 && band.second > band.first && band.second < sample_rate / 2.0)) {
    throw ValidationError(fmt::format("search band ({}, {}) Hz must lie inside (0, {}) Hz", band.first,
                                      band.second, sample_rate / 2.0));
  }
  std::vector<Periodogram> spectra(signals.size());
  parallel_for(signals.size(), [&](std::size_t c) { spectra[c] = periodogram(signals[c], sample_rate); });
  for (const auto& s : spectra) {
    if (s.power.size() != spectra.front().power.size())
      throw DataError("signals for spectral peak detection differ in length");
  }
  const auto& grid = spectra.front();
  std::vector<double> mean_power(grid.power.size(), 0.0);
  for (const auto& s : spectra) {
    for (std::size_t k = 0; k < mean_power.size(); ++k) mean_power[k] += s.power[k];
  }
  for (auto& v : mean_power) v /= static_cast<double>(spectra.size());

  std::vector<std::size_t> in_band;
  for (std::size_t k = 0; k < mean_power.size(); ++k) {
    if (grid.frequency_hz[k] >= band.first && grid.frequency_hz[k] <= band.second) in_band.push_back(k);
  }
  if (in_band.size() < 3) throw ValidationError("search band narrower than three spectral bins");

  std::vector<double> band_power;
  band_power.reserve(in_band.size());
  for (auto k : in_band) band_power.push_back(mean_power[k]);
  auto mid = band_power.begin() + static_cast<std::ptrdiff_t>(band_power.size() / 2);
  std::nth_element(band_power.begin(), mid, band_power.end());
  const double floor = *mid;

  // Largest in-band local maximum of the averaged spectrum.
  std::size_t best = 0;
  double best_power = -1.0;
  for (auto k : in_band) {
    if (k == 0 || k + 1 >= mean_power.size()) continue;
    const double p = mean_power[k];
    if (p >= mean_power[k - 1] && p >= mean_power[k + 1] && p > best_power) {
      best = k;
      best_power = p;
    }
  }
  if (best_power <= 0.0 || !(best_power > kPeakToFloorRatio * floor)) {
    throw NoDominantModeError(fmt::format(
        "no spectral peak in ({}, {}) Hz exceeds {}x the median floor", band.first, band.second,
        kPeakToFloorRatio));
  }

  const double a = std::log(std::max(mean_power[best - 1], 1e-300));
  const double b = std::log(best_power);
  const double c = std::log(std::max(mean_power[best + 1], 1e-300));
  const double denom = a - 2.0 * b + c;
  double delta = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
  delta = std::clamp(delta, -0.5, 0.5);
  const double log_peak = b - 0.25 * (a - c) * delta;

  SpectralPeak peak;
  peak.frequency_hz = (static_cast<double>(best) + delta) * grid.resolution_hz;
  peak.resolution_hz = grid.resolution_hz;
  peak.band_searched = band;
  peak.peak_to_floor = best_power / floor;
  // Sinusoid amplitude from one-sided PSD: |X| = sqrt(P fs E / 2), A = 2|X| / sum(w).
  const double peak_power = std::exp(log_peak);
  peak.amplitude = 2.0 * std::sqrt(peak_power * sample_rate * grid.window_energy / 2.0) / grid.window_sum;
  return peak;
}

SpectralPeak detect_dominant_frequency(const EventDataset& ds, Band band) {
  std::vector<std::vector<double>> mags;
  mags.reserve(ds.channels.size());
  for (const auto& ch : ds.channels) mags.push_back(ch.magnitude);
  return detect_dominant_frequency(mags, ds.sample_rate, band);
}

std::complex<double> FilterSpec::response(double f_hz) const {
  const auto zinv = std::polar(1.0, -2.0 * kPi * f_hz / sample_rate);
  std::complex<double> h{1.0, 0.0};
  for (const auto& s : sections) h *= section_response(s, zinv);
  return h;
}

double FilterSpec::center_hz() const {
  if (kind == FilterKind::LowPass) return 0.0;
  const auto warp = [this](double f) { return 2.0 * sample_rate * std::tan(kPi * f / sample_rate); };
  const double w0 = std::sqrt(warp(edges_hz[0]) * warp(edges_hz[1]));
  return sample_rate / kPi * std::atan(w0 / (2.0 * sample_rate));
}

FilterSpec design_butterworth(FilterKind kind, int order, std::vector<double> edges_hz, double sample_rate) {
  if (!(sample_rate > 0.0)) throw DesignError("sample rate must be positive");
  if (order != 2 && order != 4 && order != 6 && order != 8)
    throw DesignError(fmt::format("unsupported Butterworth order {} (use 2, 4, 6 or 8)", order));
  const std::size_t expected_edges = kind == FilterKind::LowPass ? 1 : 2;
  if (edges_hz.size() != expected_edges)
    throw DesignError(fmt::format("expected {} corner frequencies, got {}", expected_edges, edges_hz.size()));
  validate_edges(edges_hz, sample_rate);
  if (kind == FilterKind::BandPass && !(edges_hz[0] < edges_hz[1]))
    throw DesignError(fmt::format("band edges inverted: {} >= {} Hz", edges_hz[0], edges_hz[1]));

  FilterSpec spec;
  spec.kind = kind;
  spec.order = order;
  spec.edges_hz = edges_hz;
  spec.sample_rate = sample_rate;

  const double two_fs = 2.0 * sample_rate;
  const auto warp = [&](double f) { return two_fs * std::tan(kPi * f / sample_rate); };
  const auto bilinear = [&](std::complex<double> s) { return (two_fs + s) / (two_fs - s); };

  // Upper-half-plane poles of the normalised analog prototype.
  std::vector<std::complex<double>> proto;
  for (int k = 0; k < order / 2; ++k) {
    proto.push_back(std::polar(1.0, kPi * (2.0 * k + order + 1) / (2.0 * order)));
  }

  if (kind == FilterKind::LowPass) {
    const double wc = warp(edges_hz[0]);
    for (const auto& p : proto) {
      const auto z = bilinear(wc * p);
      auto sec = section_from_pole(z, 1.0, 2.0, 1.0);
      const double g = (1.0 + sec[4] + sec[5]) / 4.0;  // unit DC gain per section
      sec[0] *= g;
      sec[1] *= g;
      sec[2] *= g;
      spec.sections.push_back(sec);
    }
  } else {
    const double w1 = warp(edges_hz[0]);
    const double w2 = warp(edges_hz[1]);
    const double w0 = std::sqrt(w1 * w2);
    const double bw = w2 - w1;
    for (const auto& p : proto) {
      const auto pb = p * bw;
      const auto disc = std::sqrt(pb * pb - 4.0 * w0 * w0);
      for (const auto& s : {(pb + disc) / 2.0, (pb - disc) / 2.0}) {
        spec.sections.push_back(section_from_pole(bilinear(s), 1.0, 0.0, -1.0));
      }
    }
    const double g = std::pow(1.0 / spec.gain(spec.center_hz()), 1.0 / static_cast<double>(spec.sections.size()));
    for (auto& sec : spec.sections) {
      sec[0] *= g;
      sec[2] *= g;
    }
  }

  std::stable_sort(spec.sections.begin(), spec.sections.end(),
                   [](const auto& a, const auto& b) { return pole_magnitude(a) < pole_magnitude(b); });
  for (const auto& sec : spec.sections) {
    // Roots of z^2 + a1 z + a2; complex pair has |z|^2 = a2, real pair checked directly.
    const double a1 = sec[4], a2 = sec[5];
    const auto disc = std::sqrt(std::complex<double>(a1 * a1 - 4.0 * a2));
    const double r = std::max(std::abs((-a1 + disc) / 2.0), std::abs((-a1 - disc) / 2.0));
    if (!(r < 1.0)) throw DesignError("designed section is not stable; corner too close to 0 or Nyquist");
  }
  return spec;
}

FilterSpec design_band_around(double f_s, Band rel, double sample_rate, int order) {
  if (!(rel.first > 0.0 && rel.second > rel.first))
    throw DesignError(fmt::format("relative band {}:{} is invalid", rel.first, rel.second));
  return design_butterworth(FilterKind::BandPass, order, {rel.first * f_s, rel.second * f_s}, sample_rate);
}

std::vector<double> filter_sos(const FilterSpec& fs, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  if (y.empty()) return y;
  // Steady-state section states for a unit step, scaled by the cascade gain
  // reaching each section.
  double upstream_gain = 1.0;
  const double x0 = x.front();
  for (const auto& s : fs.sections) {
    const double b0 = s[0], b1 = s[1], b2 = s[2], a1 = s[4], a2 = s[5];
    const double g = (b0 + b1 + b2) / (1.0 + a1 + a2);
    double z2 = (b2 - a2 * g) * upstream_gain * x0;
    double z1 = (g - b0) * upstream_gain * x0;
    for (auto& v : y) {
      const double in = v;
      const double out = b0 * in + z1;
      z1 = b1 * in - a1 * out + z2;
      z2 = b2 * in - a2 * out;
      v = out;
    }
    upstream_gain *= g;
  }
  return y;
}

std::vector<double> apply_zero_phase(const FilterSpec& fs, std::span<const double> x) {
  const auto order = static_cast<std::size_t>(fs.digital_order());
  const auto n = x.size();
  if (n <= 6 * order) {
    throw LengthError(fmt::format("input of {} samples is too short for zero-phase filtering (need > {})", n,
                                  6 * order));
  }
  const std::size_t pad = 3 * order;
  // Odd reflection about both end samples.
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t k = pad; k >= 1; --k) ext.push_back(2.0 * x[0] - x[k]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t k = 1; k <= pad; ++k) ext.push_back(2.0 * x[n - 1] - x[n - 1 - k]);

  const auto reversed = [](std::vector<double> v) {
    std::reverse(v.begin(), v.end());
    return v;
  };
  const auto forward = [&fs](const std::vector<double>& v) { return filter_sos(fs, v); };
  const auto backward = [&](const std::vector<double>& v) { return reversed(forward(reversed(v))); };

  // Average of forward-then-backward and backward-then-forward passes, which
  // keeps the operator exactly equivariant under time reversal.
  const auto fb = backward(forward(ext));
  const auto bf = forward(backward(ext));
  std::vector<double> y(n);
  for (std::size_t k = 0; k < n; ++k) y[k] = 0.5 * (fb[pad + k] + bf[pad + k]);
  return y;
}

std::pair<std::size_t, std::size_t> crop_range(std::size_t n, Band keep) {
  if (!(keep.first >= 0.0 && keep.first < keep.second && keep.second <= 1.0))
    throw ValidationError(fmt::format("crop fractions {}:{} must satisfy 0 <= lo < hi <= 1", keep.first, keep.second));
  const auto lo = static_cast<std::size_t>(std::floor(keep.first * static_cast<double>(n)));
  const auto hi = static_cast<std::size_t>(std::floor(keep.second * static_cast<double>(n)));
  if (hi < lo + 2) throw LengthError(fmt::format("cropping {} samples to {}:{} leaves fewer than 2", n, keep.first, keep.second));
  return {lo, hi};
}

std::vector<double> crop_central(std::span<const double> x, Band keep) {
  const auto [lo, hi] = crop_range(x.size(), keep);
  return {x.begin() + static_cast<std::ptrdiff_t>(lo), x.begin() + static_cast<std::ptrdiff_t>(hi)};
}

EventDataset filter_dataset(const EventDataset& ds, const FilterSpec& fs) {
  EventDataset out = ds;
  parallel_for(out.channels.size(), [&](std::size_t c) {
    auto& ch = out.channels[c];
    for (auto* series : {&ch.magnitude, &ch.angle}) {
      if (std::any_of(series->begin(), series->end(), [](double v) { return !std::isfinite(v); }))
        throw DataError(fmt::format("loc{} {} has non-finite samples; repair gaps before filtering",
                                    ch.location_id, to_string(ch.quantity)));
      *series = apply_zero_phase(fs, *series);
    }
  });
  return out;
}

void to_json(nlohmann::json& j, const FilterSpec& fs) {
  j = nlohmann::json{{"kind", fs.kind == FilterKind::LowPass ? "LowPass" : "BandPass"},
                     {"order", fs.order},
                     {"edges_hz", fs.edges_hz},
                     {"sample_rate_hz", fs.sample_rate},
                     {"sections", fs.sections}};
}

}  // namespace oscl
