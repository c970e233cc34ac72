#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "oscl/phasor_io.hpp"

namespace oscl {

/// Synthetic oscillation event with a planted source. The source location
/// carries A e^{-zeta w t} sin(w t) (constant amplitude when `forced`) in P and
/// Q; every other location receives an attenuated copy whose amplitude is the
/// best product of hop_gain * coupling weights along a path from the source,
/// delayed by lag_per_hop_s per hop. Independent white noise is added per
/// channel at noise_snr_db relative to the source's oscillation RMS.
struct SynthScenario {
  int n_locations = 5;
  int source_location = 1;  // 1-based location id
  double mode_freq_hz = 0.158;
  double mode_damping = 0.01;
  bool forced = false;
  double amplitude_pu = 0.05;  // peak of the source P oscillation
  double q_ratio = 0.6;        // Q amplitude relative to P
  std::vector<std::vector<double>> coupling;  // row-stochastic, empty = chain
  double hop_gain = 0.8;
  double lag_per_hop_s = 0.25;
  double noise_snr_db = 30.0;
  double noise_reference_pu = 0.01;  // noise reference when amplitude_pu == 0
  double duration_s = 120.0;
  double sample_rate_hz = 50.0;
  std::uint64_t seed = 42;

  void validate() const;
};

struct GroundTruth {
  int source_location = 0;
  double mode_freq_hz = 0.0;
};

struct SynthEvent {
  EventDataset dataset;
  GroundTruth truth;
  std::vector<double> attenuation;  // per location, source = 1
  std::vector<int> hops;            // graph distance from the source
};

SynthEvent generate_event(const SynthScenario& scenario);

/// Path graph 1 - 2 - ... - n with weights 1/degree.
std::vector<std::vector<double>> chain_coupling(int n);

/// Random tree on n nodes with weights 1/degree, deterministic in `seed`.
std::vector<std::vector<double>> random_tree_coupling(int n, std::uint64_t seed);

void to_json(nlohmann::json& j, const SynthScenario& s);
void from_json(const nlohmann::json& j, SynthScenario& s);
void to_json(nlohmann::json& j, const GroundTruth& t);

}  // namespace oscl
