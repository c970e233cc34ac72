#pragma once

#include <complex>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "oscl/phasor_io.hpp"
#include "oscl/signal_prep.hpp"

namespace oscl {

// Sign convention for both baselines: P and Q are positive when flowing from
// the plant into the grid.

struct DefLocation {
  double energy_rate = 0.0;   // energy units per second
  double total_energy = 0.0;  // W at the end of the cropped window
  double trend_r2 = 0.0;
};

struct DefResult {
  std::map<int, DefLocation> per_location;
  std::vector<int> ranking_injecting;  // positive rates, largest first
  std::vector<int> ranking_absorbing;  // negative rates, most negative first
};

/// Dissipating energy flow. Per location the band-passed deviations of P, Q,
/// unwrapped voltage angle and ln V are integrated with trapezoidal increments
///
///     W_k = sum_{m<k} 0.5 (dP_m + dP_{m+1}) (dth_{m+1} - dth_m)
///                   + 0.5 (dQ_m + dQ_{m+1}) (dlnV_{m+1} - dlnV_m)
///
/// and the energy rate is the least-squares slope of W over the cropped window.
/// A positive rate marks a location that injects oscillation energy.
DefResult def_energy(const EventDataset& ds, const FilterSpec& band, Band crop = kDefaultCrop);

/// Trapezoidal energy path integral of already prepared deviation signals.
std::vector<double> dissipating_energy(std::span<const double> dP, std::span<const double> dtheta,
                                       std::span<const double> dQ, std::span<const double> dlnV);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LineFit fit_line(std::span<const double> y, double dt);

inline constexpr double kDefaultQvThresholdDeg = 30.0;
inline constexpr double kMinCoherence = 0.5;
inline constexpr double kQvMinCycles = 3.0;

struct QvLocation {
  double phase_deg = 0.0;  // angle(Q) - angle(V) in (-180, 180]; positive means Q leads V
  double coherence = 0.0;
  bool in_phase = false;
};

struct QvPhaseResult {
  std::map<int, QvLocation> per_location;
  double threshold_deg = kDefaultQvThresholdDeg;
  double f_s = 0.0;
};

struct QvOptions {
  double threshold_deg = kDefaultQvThresholdDeg;
  std::optional<FilterSpec> band;  // applied to dQ and dV when present
  Band crop = kDefaultCrop;        // used only together with `band`
};

QvPhaseResult qv_phase(const EventDataset& ds, double f_s, const QvOptions& options = {});

/// Phase and coherence of a signal pair at f_s; exposed for direct testing.
QvLocation qv_phase_pair(std::span<const double> q, std::span<const double> v, double f_s,
                         double sample_rate, double threshold_deg);

/// Hann-windowed DFT coefficient of `x` at the bin nearest `f_hz`.
std::complex<double> dft_at(std::span<const double> x, double f_hz, double sample_rate);

void to_json(nlohmann::json& j, const DefResult& r);
void to_json(nlohmann::json& j, const QvPhaseResult& r);

}  // namespace oscl
