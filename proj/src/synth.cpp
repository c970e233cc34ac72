#include "oscl/synth.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "oscl/errors.hpp"
#include "oscl/parallel.hpp"

namespace oscl {

namespace {

constexpr double kV0 = 1.0;
constexpr double kP0 = 0.6;
constexpr double kQ0 = 0.1;
constexpr double kVoltageSensitivity = 0.05;  // d ln V per pu of dQ
constexpr double kAngleSensitivity = 0.05;    // rad per pu of dP quadrature

enum Stream : std::uint32_t { kNoiseP = 1, kNoiseQ, kNoiseV, kNoiseTheta };

std::mt19937_64 stream_for(std::uint64_t seed, int location, Stream s) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(location), static_cast<std::uint32_t>(s)};
  return std::mt19937_64(seq);
}

std::vector<std::vector<double>> weights_from_adjacency(const std::vector<std::vector<int>>& adj) {
  const auto n = adj.size();
  std::vector<std::vector<double>> c(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (int j : adj[i]) c[i][static_cast<std::size_t>(j)] = 1.0 / static_cast<double>(adj[i].size());
    if (adj[i].empty()) c[i][i] = 1.0;
  }
  return c;
}

}  // namespace

std::vector<std::vector<double>> chain_coupling(int n) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (int i = 0; i + 1 < n; ++i) {
    adj[static_cast<std::size_t>(i)].push_back(i + 1);
    adj[static_cast<std::size_t>(i + 1)].push_back(i);
  }
  return weights_from_adjacency(adj);
}

std::vector<std::vector<double>> random_tree_coupling(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (int k = 1; k < n; ++k) {
    std::uniform_int_distribution<int> parent(0, k - 1);
    const int p = parent(rng);
    adj[static_cast<std::size_t>(k)].push_back(p);
    adj[static_cast<std::size_t>(p)].push_back(k);
  }
  return weights_from_adjacency(adj);
}

void SynthScenario::validate() const {
  if (n_locations < 1) throw ScenarioError("n_locations must be >= 1");
  if (source_location < 1 || source_location > n_locations)
    throw ScenarioError(fmt::format("source_location {} outside [1, {}]", source_location, n_locations));
  if (!(sample_rate_hz > 0.0)) throw ScenarioError("sample_rate_hz must be positive");
  if (!(mode_freq_hz > 0.0 && mode_freq_hz < sample_rate_hz / 2.0))
    throw ScenarioError(fmt::format("mode_freq_hz must lie in (0, {})", sample_rate_hz / 2.0));
  if (duration_s * mode_freq_hz < 10.0)
    throw ScenarioError(fmt::format("duration {} s holds fewer than 10 cycles of {} Hz", duration_s, mode_freq_hz));
  if (!(amplitude_pu >= 0.0)) throw ScenarioError("amplitude_pu must be non-negative");
  if (!(hop_gain > 0.0 && hop_gain < 1.0)) throw ScenarioError("hop_gain must lie in (0, 1)");
  if (!(lag_per_hop_s >= 0.0)) throw ScenarioError("lag_per_hop_s must be non-negative");
  if (!coupling.empty()) {
    if (coupling.size() != static_cast<std::size_t>(n_locations))
      throw ScenarioError("coupling must be n_locations x n_locations");
    for (const auto& row : coupling) {
      if (row.size() != static_cast<std::size_t>(n_locations))
        throw ScenarioError("coupling must be n_locations x n_locations");
      double sum = 0.0;
      for (double w : row) {
        if (!(w >= 0.0)) throw ScenarioError("coupling weights must be non-negative");
        sum += w;
      }
      if (std::abs(sum - 1.0) > 1e-9) throw ScenarioError("coupling rows must sum to 1");
    }
  }
}

SynthEvent generate_event(const SynthScenario& sc) {
  sc.validate();
  const auto n_loc = static_cast<std::size_t>(sc.n_locations);
  const auto coupling = sc.coupling.empty() ? chain_coupling(sc.n_locations) : sc.coupling;
  const auto src = static_cast<std::size_t>(sc.source_location - 1);

  // Hop count by BFS; attenuation by the strongest multiplicative path.
  std::vector<int> hops(n_loc, -1);
  std::vector<double> atten(n_loc, 0.0);
  hops[src] = 0;
  atten[src] = 1.0;
  std::queue<std::size_t> frontier;
  frontier.push(src);
  while (!frontier.empty()) {
    const auto i = frontier.front();
    frontier.pop();
    for (std::size_t j = 0; j < n_loc; ++j) {
      if (j != i && coupling[j][i] > 0.0 && hops[j] < 0) {
        hops[j] = hops[i] + 1;
        frontier.push(j);
      }
    }
  }
  for (std::size_t pass = 0; pass < n_loc; ++pass) {
    for (std::size_t j = 0; j < n_loc; ++j) {
      if (j == src) continue;
      for (std::size_t i = 0; i < n_loc; ++i) {
        if (i != j) atten[j] = std::max(atten[j], atten[i] * sc.hop_gain * coupling[j][i]);
      }
    }
  }

  const auto n = static_cast<std::size_t>(std::llround(sc.duration_s * sc.sample_rate_hz));
  const double w = 2.0 * std::numbers::pi * sc.mode_freq_hz;
  const double dt = 1.0 / sc.sample_rate_hz;
  const auto envelope = [&](double t) { return sc.forced ? 1.0 : std::exp(-sc.mode_damping * w * t); };

  double rms_ref = sc.noise_reference_pu;
  if (sc.amplitude_pu > 0.0) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double t = static_cast<double>(k) * dt;
      const double s = sc.amplitude_pu * envelope(t) * std::sin(w * t);
      acc += s * s;
    }
    rms_ref = std::sqrt(acc / static_cast<double>(n));
  }
  const double sigma = rms_ref * std::pow(10.0, -sc.noise_snr_db / 20.0);

  SynthEvent ev;
  ev.truth = {sc.source_location, sc.mode_freq_hz};
  ev.attenuation = atten;
  ev.hops = hops;
  ev.dataset.sample_rate = sc.sample_rate_hz;
  ev.dataset.units = "pu";
  ev.dataset.window = {0.0, static_cast<double>(n) * dt};
  ev.dataset.channels.resize(2 * n_loc);

  parallel_for(n_loc, [&](std::size_t j) {
    const int id = static_cast<int>(j) + 1;
    const double a = atten[j] * sc.amplitude_pu;
    const double lag = hops[j] > 0 ? hops[j] * sc.lag_per_hop_s : 0.0;
    const double polarity = j == src ? 1.0 : -1.0;
    const double theta0 = -0.05 * std::max(hops[j], 0);
    auto rng_p = stream_for(sc.seed, id, kNoiseP);
    auto rng_q = stream_for(sc.seed, id, kNoiseQ);
    auto rng_v = stream_for(sc.seed, id, kNoiseV);
    auto rng_t = stream_for(sc.seed, id, kNoiseTheta);
    std::normal_distribution<double> gauss(0.0, 1.0);

    PhasorChannel v, i;
    v.location_id = i.location_id = id;
    v.quantity = Quantity::Voltage;
    i.quantity = Quantity::Current;
    v.sample_rate = i.sample_rate = sc.sample_rate_hz;
    v.t0 = i.t0 = 0.0;
    v.units = i.units = "pu";
    v.magnitude.resize(n);
    v.angle.resize(n);
    i.magnitude.resize(n);
    i.angle.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = static_cast<double>(k) * dt;
      const double env = a * envelope(t);
      const double phase = w * (t - lag);
      const double dp = env * std::sin(phase);
      const double dq = sc.q_ratio * env * std::sin(phase);
      // Source: angle lags P by 90 degrees (exports energy) and V follows Q.
      const double dtheta = -polarity * kAngleSensitivity * env * std::cos(phase);
      const double dlnv = polarity * kVoltageSensitivity * dq;

      const double p = kP0 + dp + sigma * gauss(rng_p);
      const double q = kQ0 + dq + sigma * gauss(rng_q);
      const double vm = kV0 * std::exp(dlnv + kVoltageSensitivity * sigma * gauss(rng_v));
      const double th = theta0 + dtheta + kAngleSensitivity * sigma * gauss(rng_t);
      if (!(vm > 0.0) || !std::isfinite(vm)) {
        throw ScenarioError("voltage magnitude would become non-positive; use a smaller amplitude");
      }
      v.magnitude[k] = vm;
      v.angle[k] = th;
      i.magnitude[k] = std::hypot(p, q) / vm;
      i.angle[k] = th - std::atan2(q, p);
    }
    ev.dataset.channels[2 * j] = std::move(v);
    ev.dataset.channels[2 * j + 1] = std::move(i);
  });
  return ev;
}

void to_json(nlohmann::json& j, const SynthScenario& s) {
  j = nlohmann::json{{"n_locations", s.n_locations},
                     {"source_location", s.source_location},
                     {"mode_freq_hz", s.mode_freq_hz},
                     {"mode_damping", s.mode_damping},
                     {"forced", s.forced},
                     {"amplitude_pu", s.amplitude_pu},
                     {"q_ratio", s.q_ratio},
                     {"coupling", s.coupling},
                     {"hop_gain", s.hop_gain},
                     {"lag_per_hop_s", s.lag_per_hop_s},
                     {"noise_snr_db", s.noise_snr_db},
                     {"noise_reference_pu", s.noise_reference_pu},
                     {"duration_s", s.duration_s},
                     {"sample_rate_hz", s.sample_rate_hz},
                     {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SynthScenario& s) {
  SynthScenario d;
  s.n_locations = j.value("n_locations", d.n_locations);
  s.source_location = j.value("source_location", d.source_location);
  s.mode_freq_hz = j.value("mode_freq_hz", d.mode_freq_hz);
  s.mode_damping = j.value("mode_damping", d.mode_damping);
  s.forced = j.value("forced", d.forced);
  s.amplitude_pu = j.value("amplitude_pu", d.amplitude_pu);
  s.q_ratio = j.value("q_ratio", d.q_ratio);
  s.coupling = j.value("coupling", d.coupling);
  s.hop_gain = j.value("hop_gain", d.hop_gain);
  s.lag_per_hop_s = j.value("lag_per_hop_s", d.lag_per_hop_s);
  s.noise_snr_db = j.value("noise_snr_db", d.noise_snr_db);
  s.noise_reference_pu = j.value("noise_reference_pu", d.noise_reference_pu);
  s.duration_s = j.value("duration_s", d.duration_s);
  s.sample_rate_hz = j.value("sample_rate_hz", d.sample_rate_hz);
  s.seed = j.value("seed", d.seed);
}

void to_json(nlohmann::json& j, const GroundTruth& t) {
  j = nlohmann::json{{"source_location", t.source_location}, {"mode_freq_hz", t.mode_freq_hz}};
}

}  // namespace oscl
