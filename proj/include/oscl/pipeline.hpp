#pragma once

#include <optional>
#include <string>
#include <vector>

#include "oscl/baselines.hpp"
#include "oscl/edmd.hpp"
#include "oscl/lifting.hpp"
#include "oscl/phasor_io.hpp"
#include "oscl/signal_prep.hpp"

namespace oscl {

enum class SpectrumSource { Magnitudes, PowerPQ };

/// Every knob of the end-to-end analysis. Defaults: 3 Hz low-pass, band
/// [0.9, 1.1] f_s, central 20-80% crop, P/Q dictionary, elbow rank.
struct AnalysisOptions {
  std::optional<TimeWindow> window;
  double f_min_hz = kDefaultMinFrequencyHz;
  double max_gap_fraction = 0.05;
  double lowpass_hz = 3.0;  // <= 0 disables
  int filter_order = 4;
  Band search_band = kDefaultSearchBand;
  SpectrumSource spectrum_source = SpectrumSource::Magnitudes;
  std::optional<double> f_s_override;
  Band band_rel{0.9, 1.1};
  std::optional<Band> band_abs;
  Band crop = kDefaultCrop;
  std::optional<int> rank;  // nullopt = elbow
  DictionaryConfig dictionary;
  bool run_def = false;
  bool run_qv = false;
  double qv_threshold_deg = kDefaultQvThresholdDeg;
};

/// Gap repair, windowing and low-pass filtering.
struct PreparedData {
  EventDataset dataset;
  std::optional<FilterSpec> lowpass;
  std::vector<std::string> warnings;
};

PreparedData prepare_dataset(const EventDataset& raw, const AnalysisOptions& options);

/// Spectral peak of the prepared dataset according to options.spectrum_source.
SpectralPeak find_oscillation(const EventDataset& prepared, const AnalysisOptions& options);

FilterSpec band_filter_for(double f_s, double sample_rate, const AnalysisOptions& options);

struct AnalysisResult {
  PreparedData prepared;
  SpectralPeak peak;
  double f_s = 0.0;
  FilterSpec bandpass;
  std::vector<ObservableDef> dictionary;
  Eigen::Index snapshot_count = 0;
  RankChoice rank;
  KoopmanModel model;
  ModeList modes;
  TargetMode target;
  ParticipationReport participation;
  std::optional<DefResult> def;
  std::optional<QvPhaseResult> qv;
  std::vector<std::string> warnings;
};

/// load -> repair -> window -> low-pass -> FFT peak -> lift -> band-pass ->
/// crop -> EDMD -> participation, plus the requested baselines.
AnalysisResult run_analysis(const EventDataset& raw, const AnalysisOptions& options);

struct QvSweepEntry {
  TimeWindow window;
  QvPhaseResult result;
};

/// Q-V phase over sliding sub-windows of the prepared dataset, to expose how
/// sensitive the verdict is to the chosen window.
std::vector<QvSweepEntry> qv_window_sweep(const EventDataset& prepared, double f_s, const QvOptions& options,
                                          double window_s, double step_s);

}  // namespace oscl
