#include "oscl/pipeline.hpp"

#include <fmt/format.h>

#include "oscl/errors.hpp"
#include "oscl/parallel.hpp"

namespace oscl {

PreparedData prepare_dataset(const EventDataset& raw, const AnalysisOptions& options) {
  PreparedData out;
  auto ds = exclude_bad_channels(raw, options.max_gap_fraction);
  for (const auto& ex : ds.excluded_locations) {
    out.warnings.push_back(fmt::format("loc{} excluded: {}", ex.location_id, ex.reason));
  }
  for (const auto& [id, count] : ds.interpolated_samples) {
    out.warnings.push_back(fmt::format("loc{}: {} samples interpolated", id, count));
  }
  if (options.window) {
    ds = align_and_window(ds, options.window->t_start, options.window->t_end, options.f_min_hz);
  } else {
    for (auto& ch : ds.channels) unwrap_angles(ch.angle);
  }
  ds.validate();
  if (options.lowpass_hz > 0.0) {
    out.lowpass = design_butterworth(FilterKind::LowPass, options.filter_order, {options.lowpass_hz}, ds.sample_rate);
    ds = filter_dataset(ds, *out.lowpass);
  }
  out.dataset = std::move(ds);
  return out;
}

SpectralPeak find_oscillation(const EventDataset& prepared, const AnalysisOptions& options) {
  if (options.spectrum_source == SpectrumSource::Magnitudes) {
    return detect_dominant_frequency(prepared, options.search_band);
  }
  std::vector<std::vector<double>> signals;
  for (int id : prepared.locations()) {
    auto pq = compute_pq(prepared.voltage(id), prepared.current(id));
    signals.push_back(std::move(pq.p));
    signals.push_back(std::move(pq.q));
  }
  return detect_dominant_frequency(signals, prepared.sample_rate, options.search_band);
}

FilterSpec band_filter_for(double f_s, double sample_rate, const AnalysisOptions& options) {
  if (options.band_abs) {
    return design_butterworth(FilterKind::BandPass, options.filter_order,
                              {options.band_abs->first, options.band_abs->second}, sample_rate);
  }
  return design_band_around(f_s, options.band_rel, sample_rate, options.filter_order);
}

AnalysisResult run_analysis(const EventDataset& raw, const AnalysisOptions& options) {
  AnalysisResult r;
  r.prepared = prepare_dataset(raw, options);
  const auto& ds = r.prepared.dataset;
  r.warnings = r.prepared.warnings;

  if (options.f_s_override) {
    r.f_s = *options.f_s_override;
    r.peak.frequency_hz = r.f_s;
    r.peak.band_searched = options.search_band;
  } else {
    r.peak = find_oscillation(ds, options);
    r.f_s = r.peak.frequency_hz;
  }
  r.bandpass = band_filter_for(r.f_s, ds.sample_rate, options);

  r.dictionary = build_dictionary(ds, options.dictionary);
  const Eigen::MatrixXd lifted = evaluate_observables(ds, r.dictionary);
  const auto [lo, hi] = crop_range(static_cast<std::size_t>(lifted.cols()), options.crop);
  Eigen::MatrixXd prepared(lifted.rows(), static_cast<Eigen::Index>(hi - lo));
  parallel_for(static_cast<std::size_t>(lifted.rows()), [&](std::size_t row) {
    const auto rr = static_cast<Eigen::Index>(row);
    const Eigen::VectorXd centered = lifted.row(rr).transpose().array() - lifted.row(rr).mean();
    const auto filtered = apply_zero_phase(r.bandpass, {centered.data(), static_cast<std::size_t>(centered.size())});
    for (std::size_t k = lo; k < hi; ++k) prepared(rr, static_cast<Eigen::Index>(k - lo)) = filtered[k];
  });
  std::vector<std::string> names;
  for (const auto& d : r.dictionary) names.push_back(d.name);
  const auto snap = make_snapshots(prepared, std::move(names), 1.0 / ds.sample_rate);
  r.snapshot_count = snap.snapshots();
  r.warnings.insert(r.warnings.end(), snap.warnings.begin(), snap.warnings.end());

  const auto gram = assemble_gram(snap);
  const auto svd = svd_gram(gram);
  r.rank = choose_rank({svd.sigma.data(), static_cast<std::size_t>(svd.sigma.size())}, options.rank);
  r.warnings.insert(r.warnings.end(), r.rank.warnings.begin(), r.rank.warnings.end());
  r.model = reduce_and_decompose(gram, svd, snap.dt, r.rank.rank);
  r.warnings.insert(r.warnings.end(), r.model.warnings.begin(), r.model.warnings.end());
  r.modes = to_continuous(r.model);
  r.warnings.insert(r.warnings.end(), r.modes.warnings.begin(), r.modes.warnings.end());
  r.target = select_target_mode(r.modes.modes, r.f_s);
  r.warnings.insert(r.warnings.end(), r.target.warnings.begin(), r.target.warnings.end());
  r.participation = participation(r.model, r.target.mode, r.dictionary);

  if (options.run_def) r.def = def_energy(ds, r.bandpass, options.crop);
  if (options.run_qv) {
    QvOptions qv;
    qv.threshold_deg = options.qv_threshold_deg;
    qv.band = r.bandpass;
    qv.crop = options.crop;
    r.qv = qv_phase(ds, r.f_s, qv);
  }
  return r;
}

std::vector<QvSweepEntry> qv_window_sweep(const EventDataset& prepared, double f_s, const QvOptions& options,
                                          double window_s, double step_s) {
  if (!(window_s > 0.0 && step_s > 0.0)) throw ValidationError("sweep window and step must be positive");
  const double start = prepared.t0();
  const double end = start + static_cast<double>(prepared.samples()) / prepared.sample_rate;
  std::vector<QvSweepEntry> out;
  for (double t = start; t + window_s <= end + 1e-9; t += step_s) {
    const auto sub = align_and_window(prepared, t, t + window_s, kMinCyclesInWindow / window_s);
    out.push_back({{t, t + window_s}, qv_phase(sub, f_s, options)});
  }
  if (out.empty()) throw ValidationError("sweep window is longer than the dataset");
  return out;
}

}  // namespace oscl
