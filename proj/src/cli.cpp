#include "oscl/cli.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string_view>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "oscl/errors.hpp"
#include "oscl/pipeline.hpp"
#include "oscl/report.hpp"
#include "oscl/synth.hpp"

namespace oscl {

namespace {

int exit_code_for(std::string_view kind) {
  if (kind == "no_dominant_mode") return kExitNoMode;
  if (kind == "conditioning") return kExitConditioning;
  if (kind == "usage" || kind == "design") return kExitUsage;
  if (kind == "numeric") return kExitNumeric;
  return kExitData;
}

void emit_error(std::string_view kind, int code, std::string_view message) {
  const nlohmann::json record = {{"error", kind}, {"exit_code", code}, {"message", message}};
  std::cerr << record.dump() << '\n';
}

Band parse_pair(const std::string& text, const char* flag) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError(fmt::format("{} expects A:B, got '{}'", flag, text));
  try {
    std::size_t used_a = 0, used_b = 0;
    const auto a_text = text.substr(0, colon);
    const auto b_text = text.substr(colon + 1);
    const double a = std::stod(a_text, &used_a);
    const double b = std::stod(b_text, &used_b);
    if (used_a != a_text.size() || used_b != b_text.size()) throw std::invalid_argument(text);
    return {a, b};
  } catch (const std::logic_error&) {
    throw UsageError(fmt::format("{} expects two numbers A:B, got '{}'", flag, text));
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Flags shared by analyze, def and qv, held as text until validated.
struct CommonFlags {
  std::string input;
  std::string window;
  double f_min = kDefaultMinFrequencyHz;
  double max_gap = 0.05;
  double lowpass = 3.0;
  int order = 4;
  std::string search_band = "0.05:1.0";
  std::string spectrum = "magnitudes";
  double fs = 0.0;
  std::string band_rel = "0.9:1.1";
  std::string band_abs;
  std::string crop = "0.2:0.8";
  std::string out;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--input", f.input, "Wide-CSV event file")->required();
  app->add_option("--window", f.window, "Analysis window t_start:t_end in seconds");
  app->add_option("--fmin", f.f_min, "Lowest analysable frequency for the window-length rule (Hz)");
  app->add_option("--max-gap", f.max_gap, "Maximum bad-sample fraction per location");
  app->add_option("--lowpass", f.lowpass, "Low-pass corner in Hz (0 disables)");
  app->add_option("--order", f.order, "Butterworth prototype order");
  app->add_option("--search-band", f.search_band, "FFT peak search band lo:hi in Hz");
  app->add_option("--spectrum", f.spectrum, "Signals for peak detection: magnitudes or pq")
      ->check(CLI::IsMember({"magnitudes", "pq"}));
  app->add_option("--fs", f.fs, "Oscillation frequency in Hz (skips FFT detection)");
  app->add_option("--band-rel", f.band_rel, "Band-pass edges as multiples of f_s, lo:hi");
  app->add_option("--band-abs", f.band_abs, "Band-pass edges in Hz, lo:hi (overrides --band-rel)");
  app->add_option("--crop", f.crop, "Central fraction kept after filtering, lo:hi");
  app->add_option("--out", f.out, "Output JSON path")->required();
}

AnalysisOptions options_from(const CommonFlags& f) {
  AnalysisOptions o;
  if (!f.window.empty()) {
    const auto w = parse_pair(f.window, "--window");
    o.window = TimeWindow{w.first, w.second};
  }
  o.f_min_hz = f.f_min;
  o.max_gap_fraction = f.max_gap;
  o.lowpass_hz = f.lowpass;
  o.filter_order = f.order;
  o.search_band = parse_pair(f.search_band, "--search-band");
  o.spectrum_source = f.spectrum == "pq" ? SpectrumSource::PowerPQ : SpectrumSource::Magnitudes;
  if (f.fs > 0.0) o.f_s_override = f.fs;
  o.band_rel = parse_pair(f.band_rel, "--band-rel");
  if (!f.band_abs.empty()) o.band_abs = parse_pair(f.band_abs, "--band-abs");
  o.crop = parse_pair(f.crop, "--crop");
  return o;
}

double oscillation_frequency(const EventDataset& prepared, const AnalysisOptions& o) {
  return o.f_s_override ? *o.f_s_override : find_oscillation(prepared, o).frequency_hz;
}

int cmd_analyze(const CommonFlags& f, const std::string& rank, const std::string& baselines, double qv_threshold,
                const DictionaryConfig& dict, const std::string& params) {
  AnalysisOptions o = params.empty() ? options_from(f) : options_from_json(read_json_file(params).at("parameters"));
  if (params.empty()) {
    if (rank != "auto") {
      try {
        std::size_t used = 0;
        o.rank = std::stoi(rank, &used);
        if (used != rank.size()) throw std::invalid_argument(rank);
      } catch (const std::logic_error&) {
        throw UsageError(fmt::format("--rank expects 'auto' or an integer, got '{}'", rank));
      }
    }
    for (const auto& b : split_list(baselines)) {
      if (b == "def") {
        o.run_def = true;
      } else if (b == "qv") {
        o.run_qv = true;
      } else {
        throw UsageError(fmt::format("unknown baseline '{}' (use def, qv)", b));
      }
    }
    o.qv_threshold_deg = qv_threshold;
    o.dictionary = dict;
  }
  const auto raw = load_event_csv(f.input);
  const auto result = run_analysis(raw, o);
  write_json_file(f.out, build_report(result, o, sha256_file(f.input)));
  return kExitOk;
}

nlohmann::json baseline_header(const CommonFlags& f, const AnalysisOptions& o, double f_s) {
  nlohmann::json j;
  j["tool_version"] = std::string(kToolVersion);
  j["dataset_fingerprint"] = sha256_file(f.input);
  j["parameters"] = options_to_json(o);
  j["f_s"] = f_s;
  return j;
}

int cmd_def(const CommonFlags& f) {
  auto o = options_from(f);
  o.run_def = true;
  const auto prepared = prepare_dataset(load_event_csv(f.input), o);
  const double f_s = oscillation_frequency(prepared.dataset, o);
  const auto band = band_filter_for(f_s, prepared.dataset.sample_rate, o);
  auto j = baseline_header(f, o, f_s);
  j["filter_specs"] = nlohmann::json::array({band});
  j["baselines"]["def"] = def_energy(prepared.dataset, band, o.crop);
  j["warnings"] = prepared.warnings;
  write_json_file(f.out, j);
  return kExitOk;
}

int cmd_qv(const CommonFlags& f, double threshold, const std::string& sweep) {
  auto o = options_from(f);
  o.run_qv = true;
  o.qv_threshold_deg = threshold;
  const auto prepared = prepare_dataset(load_event_csv(f.input), o);
  const double f_s = oscillation_frequency(prepared.dataset, o);
  QvOptions qv;
  qv.threshold_deg = threshold;
  qv.band = band_filter_for(f_s, prepared.dataset.sample_rate, o);
  qv.crop = o.crop;
  auto j = baseline_header(f, o, f_s);
  j["filter_specs"] = nlohmann::json::array({*qv.band});
  j["baselines"]["qv"] = qv_phase(prepared.dataset, f_s, qv);
  if (!sweep.empty()) {
    const auto [length, step] = parse_pair(sweep, "--sweep");
    auto rows = nlohmann::json::array();
    for (const auto& entry : qv_window_sweep(prepared.dataset, f_s, qv, length, step)) {
      rows.push_back({{"window", {entry.window.t_start, entry.window.t_end}}, {"qv", entry.result}});
    }
    j["window_sweep"] = rows;
  }
  j["warnings"] = prepared.warnings;
  write_json_file(f.out, j);
  return kExitOk;
}

struct SynthFlags {
  std::string scenario;
  std::string out;
  std::optional<int> locations, source;
  std::optional<double> freq, damping, snr, duration, amplitude;
  std::optional<std::uint64_t> seed;
  bool forced = false;
};

int cmd_synth(const SynthFlags& f) {
  SynthScenario sc;
  if (!f.scenario.empty()) {
    try {
      sc = read_json_file(f.scenario).get<SynthScenario>();
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(fmt::format("invalid scenario file: {}", e.what()));
    }
  }
  if (f.locations) sc.n_locations = *f.locations;
  if (f.source) sc.source_location = *f.source;
  if (f.freq) sc.mode_freq_hz = *f.freq;
  if (f.damping) sc.mode_damping = *f.damping;
  if (f.snr) sc.noise_snr_db = *f.snr;
  if (f.duration) sc.duration_s = *f.duration;
  if (f.amplitude) sc.amplitude_pu = *f.amplitude;
  if (f.seed) sc.seed = *f.seed;
  if (f.forced) sc.forced = true;
  const auto ev = generate_event(sc);
  write_event_csv(ev.dataset, f.out);
  auto truth_path = metadata_path_for(f.out);
  truth_path.replace(truth_path.size() - std::string_view(".meta.json").size(), std::string::npos, ".truth.json");
  nlohmann::json truth = ev.truth;
  truth["scenario"] = sc;
  write_json_file(truth_path, truth);
  return kExitOk;
}

int cmd_plotdata(const std::string& report_path, const std::string& input, const std::string& out_dir,
                 const std::string& plots) {
  const auto report = read_json_file(report_path);
  std::vector<std::string> requested = split_list(plots);
  if (requested.empty()) {
    requested = {"timeseries", "pq", "participation"};
    if (report.contains("baselines") && report["baselines"].contains("def")) requested.push_back("def");
    if (report.contains("baselines") && report["baselines"].contains("qv")) requested.push_back("qv");
  }
  write_plot_data(report, load_event_csv(input), out_dir, requested);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Oscillation contributor localisation from phasor measurements", "oscl"};
  app.require_subcommand(1);

  CommonFlags analyze_flags;
  std::string rank = "auto", baselines, params;
  double qv_threshold = kDefaultQvThresholdDeg;
  DictionaryConfig dict;
  auto* analyze = app.add_subcommand("analyze", "Run the full EDMD participation pipeline");
  add_common(analyze, analyze_flags);
  analyze->add_option("--rank", rank, "Truncation rank: auto (elbow) or an integer");
  analyze->add_option("--baselines", baselines, "Comma list of baselines to include: def,qv");
  analyze->add_option("--qv-threshold", qv_threshold, "Q-V in-phase threshold in degrees");
  analyze->add_option("--dict-p-degree", dict.p_degree, "Add P^2..P^d monomials per location");
  analyze->add_option("--dict-q-degree", dict.q_degree, "Add Q^2..Q^d monomials per location");
  analyze->add_flag("--dict-voltage", dict.voltage_magnitude, "Add voltage magnitude observables");
  analyze->add_flag("--dict-angle", dict.voltage_angle, "Add unwrapped voltage angle observables");
  analyze->add_flag("--dict-trig", dict.trig, "Add cos/sin of the V-I angle difference");
  analyze->add_option("--params", params, "Replay the parameters recorded in an earlier report");

  CommonFlags def_flags;
  auto* def = app.add_subcommand("def", "Dissipating energy flow baseline");
  add_common(def, def_flags);

  CommonFlags qv_flags;
  double qv_only_threshold = kDefaultQvThresholdDeg;
  std::string sweep;
  auto* qv = app.add_subcommand("qv", "Q-V phase alignment baseline");
  add_common(qv, qv_flags);
  qv->add_option("--threshold", qv_only_threshold, "In-phase threshold in degrees");
  qv->add_option("--sweep", sweep, "Also sweep sub-windows LENGTH:STEP in seconds");

  SynthFlags synth_flags;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic event with a planted source");
  synth->add_option("--scenario", synth_flags.scenario, "Scenario JSON file");
  synth->add_option("--out", synth_flags.out, "Output CSV path")->required();
  synth->add_option("--locations", synth_flags.locations, "Number of locations");
  synth->add_option("--source", synth_flags.source, "Planted source location (1-based)");
  synth->add_option("--freq", synth_flags.freq, "Mode frequency in Hz");
  synth->add_option("--damping", synth_flags.damping, "Damping ratio");
  synth->add_option("--snr", synth_flags.snr, "Noise SNR in dB");
  synth->add_option("--duration", synth_flags.duration, "Record length in seconds");
  synth->add_option("--amplitude", synth_flags.amplitude, "Source P oscillation amplitude (pu)");
  synth->add_option("--seed", synth_flags.seed, "Random seed");
  synth->add_flag("--forced", synth_flags.forced, "Constant-amplitude forced drive");

  std::string report_path, plot_input, out_dir, plots;
  auto* plotdata = app.add_subcommand("plotdata", "Write tidy CSV plot data from a report");
  plotdata->add_option("--report", report_path, "Report JSON from analyze")->required();
  plotdata->add_option("--input", plot_input, "Event CSV the report was computed from")->required();
  plotdata->add_option("--out-dir", out_dir, "Directory for the CSV files")->required();
  plotdata->add_option("--plots", plots, "Comma list of timeseries,pq,participation,def,qv");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("usage", kExitUsage, e.what());
    return kExitUsage;
  }

  try {
    if (*analyze) return cmd_analyze(analyze_flags, rank, baselines, qv_threshold, dict, params);
    if (*def) return cmd_def(def_flags);
    if (*qv) return cmd_qv(qv_flags, qv_only_threshold, sweep);
    if (*synth) return cmd_synth(synth_flags);
    if (*plotdata) return cmd_plotdata(report_path, plot_input, out_dir, plots);
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    emit_error(e.kind(), code, e.what());
    return code;
  } catch (const std::exception& e) {
    emit_error("internal", kExitInternal, e.what());
    return kExitInternal;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
  return run_cli(args);
}

}  // namespace oscl
