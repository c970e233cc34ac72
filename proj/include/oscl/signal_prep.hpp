#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "oscl/phasor_io.hpp"

namespace oscl {

using Band = std::pair<double, double>;

inline constexpr Band kDefaultSearchBand{0.05, 1.0};
inline constexpr double kPeakToFloorRatio = 3.0;

struct SpectralPeak {
  double frequency_hz = 0.0;
  double amplitude = 0.0;
  double resolution_hz = 0.0;
  Band band_searched{0.0, 0.0};
  double peak_to_floor = 0.0;
};

/// One-sided Hann-windowed power spectral density of a mean-removed signal,
/// zero-padded to the next power of two >= 4x its length. Scaled so that
/// sum(power) * resolution equals the window-weighted signal variance.
struct Periodogram {
  std::vector<double> frequency_hz;
  std::vector<double> power;
  double resolution_hz = 0.0;
  double window_sum = 0.0;     // sum of Hann weights
  double window_energy = 0.0;  // sum of squared Hann weights
};

Periodogram periodogram(std::span<const double> x, double sample_rate);

/// Largest periodogram peak in `band` of the channel-averaged spectrum, refined
/// by three-point parabolic interpolation on log power. Throws
/// NoDominantModeError when no in-band peak exceeds 3x the median floor.
SpectralPeak detect_dominant_frequency(std::span<const std::vector<double>> signals,
                                       double sample_rate, Band band = kDefaultSearchBand);

/// Dataset overload: averages the spectra of every channel magnitude.
SpectralPeak detect_dominant_frequency(const EventDataset& ds, Band band = kDefaultSearchBand);

enum class FilterKind { LowPass, BandPass };

/// Cascade of second-order sections, each stored as {b0, b1, b2, a0, a1, a2}
/// with a0 == 1, ordered by ascending pole magnitude.
struct FilterSpec {
  FilterKind kind = FilterKind::LowPass;
  int order = 4;  // analog prototype order
  std::vector<double> edges_hz;
  double sample_rate = 0.0;
  std::vector<std::array<double, 6>> sections;

  std::complex<double> response(double f_hz) const;
  double gain(double f_hz) const { return std::abs(response(f_hz)); }
  int digital_order() const { return 2 * static_cast<int>(sections.size()); }
  /// Frequency that maps to the analog centre of a band-pass design.
  double center_hz() const;
};

FilterSpec design_butterworth(FilterKind kind, int order, std::vector<double> edges_hz,
                              double sample_rate);

/// Convenience: band-pass with edges rel.first*f_s, rel.second*f_s.
FilterSpec design_band_around(double f_s, Band rel, double sample_rate, int order = 4);

/// Causal cascade filtering with steady-state initial conditions scaled by x[0].
std::vector<double> filter_sos(const FilterSpec& fs, std::span<const double> x);

/// Zero-phase filtering with effective response |H|^2; see README for the
/// exact scheme. Output length equals input length.
std::vector<double> apply_zero_phase(const FilterSpec& fs, std::span<const double> x);

inline constexpr Band kDefaultCrop{0.2, 0.8};

/// Index range [floor(lo*n), floor(hi*n)).
std::pair<std::size_t, std::size_t> crop_range(std::size_t n, Band keep = kDefaultCrop);
std::vector<double> crop_central(std::span<const double> x, Band keep = kDefaultCrop);

/// Zero-phase filters every channel magnitude and angle.
EventDataset filter_dataset(const EventDataset& ds, const FilterSpec& fs);

void to_json(nlohmann::json& j, const FilterSpec& fs);

}  // namespace oscl
