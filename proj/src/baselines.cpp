#include "oscl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "oscl/errors.hpp"
#include "oscl/lifting.hpp"
#include "oscl/parallel.hpp"

namespace oscl {

namespace {

std::vector<double> deviation(std::span<const double> x) {
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  std::vector<double> d(x.size());
  std::transform(x.begin(), x.end(), d.begin(), [mean](double v) { return v - mean; });
  return d;
}

std::vector<double> band_and_crop(std::span<const double> x, const FilterSpec& band, Band crop) {
  return crop_central(apply_zero_phase(band, deviation(x)), crop);
}

double wrap_deg(double d) {
  d = std::fmod(d, 360.0);
  if (d > 180.0) d -= 360.0;
  if (d <= -180.0) d += 360.0;
  return d;
}

}  // namespace

std::vector<double> dissipating_energy(std::span<const double> dP, std::span<const double> dtheta,
                                       std::span<const double> dQ, std::span<const double> dlnV) {
  const auto n = dP.size();
  if (dtheta.size() != n || dQ.size() != n || dlnV.size() != n)
    throw DataError("energy integrand series differ in length");
  std::vector<double> w(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    w[k] = w[k - 1] + 0.5 * (dP[k - 1] + dP[k]) * (dtheta[k] - dtheta[k - 1]) +
           0.5 * (dQ[k - 1] + dQ[k]) * (dlnV[k] - dlnV[k - 1]);
  }
  return w;
}

LineFit fit_line(std::span<const double> y, double dt) {
  const auto n = y.size();
  if (n < 2) throw LengthError("line fit needs at least 2 points");
  const double tn = static_cast<double>(n);
  const double t_mean = dt * (tn - 1.0) / 2.0;
  const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / tn;
  double sty = 0.0, stt = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = dt * static_cast<double>(k) - t_mean;
    const double v = y[k] - y_mean;
    sty += t * v;
    stt += t * t;
    syy += v * v;
  }
  LineFit fit;
  fit.slope = sty / stt;
  fit.intercept = y_mean - fit.slope * t_mean;
  fit.r2 = syy > 0.0 ? std::clamp(sty * sty / (stt * syy), 0.0, 1.0) : 0.0;
  return fit;
}

DefResult def_energy(const EventDataset& ds, const FilterSpec& band, Band crop) {
  const auto ids = ds.locations();
  if (ids.empty()) throw DataError("no locations for DEF");
  std::vector<DefLocation> rows(ids.size());
  parallel_for(ids.size(), [&](std::size_t g) {
    const int id = ids[g];
    const auto& v = ds.voltage(id);
    const auto& i = ds.current(id);
    const auto pq = compute_pq(v, i);
    std::vector<double> ln_v(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!(v.magnitude[k] > 0.0))
        throw DataError(fmt::format("loc{}: voltage magnitude <= 0 at sample {}; ln V undefined", id, k));
      ln_v[k] = std::log(v.magnitude[k]);
    }
    const auto dP = band_and_crop(pq.p, band, crop);
    const auto dQ = band_and_crop(pq.q, band, crop);
    const auto dth = band_and_crop(v.angle, band, crop);
    const auto dlnv = band_and_crop(ln_v, band, crop);
    const auto w = dissipating_energy(dP, dth, dQ, dlnv);
    const auto fit = fit_line(w, 1.0 / ds.sample_rate);
    rows[g] = {fit.slope, w.back(), fit.r2};
  });

  DefResult result;
  for (std::size_t g = 0; g < ids.size(); ++g) {
    if (!std::isfinite(rows[g].energy_rate)) throw NumericError(fmt::format("loc{}: energy rate not finite", ids[g]));
    result.per_location[ids[g]] = rows[g];
    if (rows[g].energy_rate > 0.0) result.ranking_injecting.push_back(ids[g]);
    if (rows[g].energy_rate < 0.0) result.ranking_absorbing.push_back(ids[g]);
  }
  const auto rate = [&](int id) { return result.per_location.at(id).energy_rate; };
  std::stable_sort(result.ranking_injecting.begin(), result.ranking_injecting.end(),
                   [&](int a, int b) { return rate(a) > rate(b); });
  std::stable_sort(result.ranking_absorbing.begin(), result.ranking_absorbing.end(),
                   [&](int a, int b) { return rate(a) < rate(b); });
  return result;
}

std::complex<double> dft_at(std::span<const double> x, double f_hz, double sample_rate) {
  const auto n = x.size();
  const double tn = static_cast<double>(n);
  const double bin = std::round(f_hz * tn / sample_rate);
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t k = 0; k < n; ++k) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / (tn - 1.0));
    acc += x[k] * w * std::polar(1.0, -2.0 * std::numbers::pi * bin * static_cast<double>(k) / tn);
  }
  return acc;
}

QvLocation qv_phase_pair(std::span<const double> q, std::span<const double> v, double f_s, double sample_rate,
                         double threshold_deg) {
  if (q.size() != v.size()) throw DataError("Q and V series differ in length");
  const double duration = static_cast<double>(q.size()) / sample_rate;
  if (duration * f_s < kQvMinCycles) {
    throw ValidationError(fmt::format("window of {:.3f} s holds fewer than {} cycles of {:.4f} Hz", duration,
                                      kQvMinCycles, f_s));
  }
  const auto cq = dft_at(q, f_s, sample_rate);
  const auto cv = dft_at(v, f_s, sample_rate);
  QvLocation out;
  out.phase_deg = wrap_deg((std::arg(cq) - std::arg(cv)) * 180.0 / std::numbers::pi);

  const auto half = q.size() / 2;
  std::complex<double> cross{0.0, 0.0};
  double pq = 0.0, pv = 0.0;
  for (std::size_t s = 0; s < 2; ++s) {
    const auto qs = q.subspan(s * half, half);
    const auto vs = v.subspan(s * half, half);
    const auto a = dft_at(qs, f_s, sample_rate);
    const auto b = dft_at(vs, f_s, sample_rate);
    cross += a * std::conj(b);
    pq += std::norm(a);
    pv += std::norm(b);
  }
  out.coherence = (pq > 0.0 && pv > 0.0) ? std::clamp(std::norm(cross) / (pq * pv), 0.0, 1.0) : 0.0;
  out.in_phase = std::abs(out.phase_deg) <= threshold_deg && out.coherence >= kMinCoherence;
  return out;
}

QvPhaseResult qv_phase(const EventDataset& ds, double f_s, const QvOptions& options) {
  if (!(f_s > 0.0)) throw ValidationError("oscillation frequency must be positive");
  const auto ids = ds.locations();
  if (ids.empty()) throw DataError("no locations for Q-V phase");
  QvPhaseResult result;
  result.threshold_deg = options.threshold_deg;
  result.f_s = f_s;
  std::vector<QvLocation> rows(ids.size());
  parallel_for(ids.size(), [&](std::size_t g) {
    const auto& v = ds.voltage(ids[g]);
    const auto pq = compute_pq(v, ds.current(ids[g]));
    std::vector<double> dq, dv;
    if (options.band) {
      dq = band_and_crop(pq.q, *options.band, options.crop);
      dv = band_and_crop(v.magnitude, *options.band, options.crop);
    } else {
      dq = deviation(pq.q);
      dv = deviation(v.magnitude);
    }
    rows[g] = qv_phase_pair(dq, dv, f_s, ds.sample_rate, options.threshold_deg);
  });
  for (std::size_t g = 0; g < ids.size(); ++g) result.per_location[ids[g]] = rows[g];
  return result;
}

void to_json(nlohmann::json& j, const DefResult& r) {
  auto rows = nlohmann::json::array();
  for (const auto& [id, row] : r.per_location) {
    rows.push_back({{"location", id},
                    {"energy_rate", row.energy_rate},
                    {"total_energy", row.total_energy},
                    {"trend_r2", row.trend_r2}});
  }
  j = nlohmann::json{{"per_location", rows},
                     {"ranking_injecting", r.ranking_injecting},
                     {"ranking_absorbing", r.ranking_absorbing}};
}

void to_json(nlohmann::json& j, const QvPhaseResult& r) {
  auto rows = nlohmann::json::array();
  for (const auto& [id, row] : r.per_location) {
    rows.push_back({{"location", id},
                    {"phase_deg", row.phase_deg},
                    {"coherence", row.coherence},
                    {"in_phase", row.in_phase}});
  }
  j = nlohmann::json{{"per_location", rows}, {"threshold_deg", r.threshold_deg}, {"f_s", r.f_s}};
}

}  // namespace oscl
