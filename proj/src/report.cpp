#include "oscl/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "oscl/errors.hpp"
#include "oscl/lifting.hpp"

namespace oscl {

namespace {

nlohmann::json band_json(Band b) { return nlohmann::json::array({b.first, b.second}); }

Band band_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw NumericError("SHA-256 digest failed");
  std::string hex;
  for (unsigned int k = 0; k < len; ++k) hex += fmt::format("{:02x}", md[k]);
  return hex;
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_bytes(path)); }

nlohmann::json options_to_json(const AnalysisOptions& o) {
  nlohmann::json j;
  j["window"] = o.window ? nlohmann::json::array({o.window->t_start, o.window->t_end}) : nlohmann::json(nullptr);
  j["f_min_hz"] = o.f_min_hz;
  j["max_gap_fraction"] = o.max_gap_fraction;
  j["lowpass_hz"] = o.lowpass_hz;
  j["filter_order"] = o.filter_order;
  j["search_band_hz"] = band_json(o.search_band);
  j["spectrum_source"] = o.spectrum_source == SpectrumSource::Magnitudes ? "magnitudes" : "pq";
  j["f_s_override"] = o.f_s_override ? nlohmann::json(*o.f_s_override) : nlohmann::json(nullptr);
  j["band_rel"] = band_json(o.band_rel);
  j["band_abs"] = o.band_abs ? band_json(*o.band_abs) : nlohmann::json(nullptr);
  j["crop"] = band_json(o.crop);
  j["rank"] = o.rank ? nlohmann::json(*o.rank) : nlohmann::json("auto");
  j["dictionary"] = {{"p_degree", o.dictionary.p_degree},
                     {"q_degree", o.dictionary.q_degree},
                     {"voltage_magnitude", o.dictionary.voltage_magnitude},
                     {"voltage_angle", o.dictionary.voltage_angle},
                     {"trig", o.dictionary.trig}};
  j["baselines"] = {{"def", o.run_def}, {"qv", o.run_qv}};
  j["qv_threshold_deg"] = o.qv_threshold_deg;
  return j;
}

AnalysisOptions options_from_json(const nlohmann::json& j) {
  AnalysisOptions o;
  try {
    if (j.contains("window") && !j["window"].is_null()) {
      o.window = TimeWindow{j["window"].at(0).get<double>(), j["window"].at(1).get<double>()};
    }
    o.f_min_hz = j.value("f_min_hz", o.f_min_hz);
    o.max_gap_fraction = j.value("max_gap_fraction", o.max_gap_fraction);
    o.lowpass_hz = j.value("lowpass_hz", o.lowpass_hz);
    o.filter_order = j.value("filter_order", o.filter_order);
    if (j.contains("search_band_hz")) o.search_band = band_from(j["search_band_hz"]);
    if (j.value("spectrum_source", std::string("magnitudes")) == "pq") o.spectrum_source = SpectrumSource::PowerPQ;
    if (j.contains("f_s_override") && !j["f_s_override"].is_null()) o.f_s_override = j["f_s_override"].get<double>();
    if (j.contains("band_rel")) o.band_rel = band_from(j["band_rel"]);
    if (j.contains("band_abs") && !j["band_abs"].is_null()) o.band_abs = band_from(j["band_abs"]);
    if (j.contains("crop")) o.crop = band_from(j["crop"]);
    if (j.contains("rank") && j["rank"].is_number_integer()) o.rank = j["rank"].get<int>();
    if (j.contains("dictionary")) {
      const auto& d = j["dictionary"];
      o.dictionary.p_degree = d.value("p_degree", 1);
      o.dictionary.q_degree = d.value("q_degree", 1);
      o.dictionary.voltage_magnitude = d.value("voltage_magnitude", false);
      o.dictionary.voltage_angle = d.value("voltage_angle", false);
      o.dictionary.trig = d.value("trig", false);
    }
    if (j.contains("baselines")) {
      o.run_def = j["baselines"].value("def", false);
      o.run_qv = j["baselines"].value("qv", false);
    }
    o.qv_threshold_deg = j.value("qv_threshold_deg", o.qv_threshold_deg);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(fmt::format("invalid analysis parameters: {}", e.what()));
  }
  return o;
}

nlohmann::json build_report(const AnalysisResult& r, const AnalysisOptions& options,
                            const std::string& dataset_fingerprint) {
  const auto& ds = r.prepared.dataset;
  nlohmann::json j;
  j["tool_version"] = std::string(kToolVersion);
  j["dataset_fingerprint"] = dataset_fingerprint;
  j["parameters"] = options_to_json(options);
  j["window"] = nlohmann::json::array({ds.window.t_start, ds.window.t_end});
  j["sample_rate_hz"] = ds.sample_rate;
  j["samples"] = ds.samples();
  j["locations"] = ds.locations();
  auto excluded = nlohmann::json::array();
  for (const auto& ex : ds.excluded_locations) excluded.push_back({{"location", ex.location_id}, {"reason", ex.reason}});
  j["excluded_locations"] = excluded;
  j["f_s"] = r.f_s;
  j["spectral_peak"] = {{"frequency_hz", r.peak.frequency_hz},
                        {"amplitude", r.peak.amplitude},
                        {"resolution_hz", r.peak.resolution_hz},
                        {"band_searched_hz", band_json(r.peak.band_searched)},
                        {"peak_to_floor", r.peak.peak_to_floor},
                        {"detected", !options.f_s_override.has_value()}};
  auto filters = nlohmann::json::array();
  if (r.prepared.lowpass) filters.push_back(*r.prepared.lowpass);
  filters.push_back(r.bandpass);
  j["filter_specs"] = filters;
  j["observables"] = r.dictionary;
  j["snapshots"] = r.snapshot_count;
  j["rank_r"] = r.rank.rank;
  j["rank_overridden"] = r.rank.overridden;
  j["koopman"] = r.model;
  j["modes"] = r.modes.modes;
  j["target_in_band"] = r.target.in_band;
  j["participation"] = r.participation;
  nlohmann::json baselines = nlohmann::json::object();
  if (r.def) baselines["def"] = *r.def;
  if (r.qv) baselines["qv"] = *r.qv;
  j["baselines"] = baselines;
  j["warnings"] = r.warnings;
  return j;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path));
  out << j.dump(2) << '\n';
}

nlohmann::json read_json_file(const std::string& path) {
  const auto bytes = read_bytes(path);
  try {
    return nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(fmt::format("'{}' is not valid JSON: {}", path, e.what()));
  }
}

std::vector<std::string> write_plot_data(const nlohmann::json& report, const EventDataset& raw,
                                         const std::string& out_dir, const std::vector<std::string>& plots) {
  namespace fs = std::filesystem;
  for (const auto& p : plots) {
    if (std::find(kAllPlots.begin(), kAllPlots.end(), p) == kAllPlots.end())
      throw UsageError(fmt::format("unknown plot '{}'", p));
  }
  const auto wants = [&](std::string_view name) { return std::find(plots.begin(), plots.end(), name) != plots.end(); };
  const auto& baselines = report.contains("baselines") ? report["baselines"] : nlohmann::json::object();
  if (wants("def") && !baselines.contains("def")) throw DataError("report has no DEF section; re-run analyze with --baselines def");
  if (wants("qv") && !baselines.contains("qv")) throw DataError("report has no Q-V section; re-run analyze with --baselines qv");
  if (wants("participation") && !report.contains("participation")) throw DataError("report has no participation section");

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", out_dir, ec.message()));
  std::vector<std::string> written;
  const auto open = [&](const std::string& name) {
    const auto path = (fs::path(out_dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot write '{}'", path));
    written.push_back(path);
    return out;
  };

  // Raw (not low-passed) series over the analysed window.
  auto options = options_from_json(report.at("parameters"));
  options.lowpass_hz = 0.0;
  const auto ds = prepare_dataset(raw, options).dataset;
  constexpr double to_deg = 180.0 / std::numbers::pi;

  if (wants("timeseries") || wants("pq")) {
    for (int id : ds.locations()) {
      const auto& v = ds.voltage(id);
      const auto& i = ds.current(id);
      if (wants("timeseries")) {
        auto out = open(fmt::format("timeseries_{}.csv", id));
        out << "time,Vm,Va_deg,Im,Ia_deg\n";
        for (std::size_t k = 0; k < v.size(); ++k) {
          out << fmt::format("{:.6f},{:.15g},{:.15g},{:.15g},{:.15g}\n", v.time_at(k), v.magnitude[k],
                             v.angle[k] * to_deg, i.magnitude[k], i.angle[k] * to_deg);
        }
      }
      if (wants("pq")) {
        const auto pq = compute_pq(v, i);
        auto out = open(fmt::format("pq_{}.csv", id));
        out << "time,P,Q\n";
        for (std::size_t k = 0; k < v.size(); ++k) {
          out << fmt::format("{:.6f},{:.15g},{:.15g}\n", v.time_at(k), pq.p[k], pq.q[k]);
        }
      }
    }
  }
  if (wants("participation")) {
    auto out = open("participation.csv");
    out << "location,score\n";
    for (const auto& row : report["participation"]["p_location"]) {
      out << fmt::format("{},{:.15g}\n", row["location"].get<int>(), row["score"].get<double>());
    }
  }
  if (wants("def")) {
    auto out = open("def.csv");
    out << "location,energy_rate\n";
    for (const auto& row : baselines["def"]["per_location"]) {
      out << fmt::format("{},{:.15g}\n", row["location"].get<int>(), row["energy_rate"].get<double>());
    }
  }
  if (wants("qv")) {
    auto out = open("qv.csv");
    out << "location,phase_deg,in_phase\n";
    for (const auto& row : baselines["qv"]["per_location"]) {
      out << fmt::format("{},{:.15g},{}\n", row["location"].get<int>(), row["phase_deg"].get<double>(),
                         row["in_phase"].get<bool>() ? 1 : 0);
    }
  }
  {
    auto out = open("README.txt");
    out << "Plot data written by oscl plotdata\n\n"
           "timeseries_<loc>.csv  time [s], Vm, Va_deg, Im, Ia_deg: phasor recordings over the analysed window\n"
           "pq_<loc>.csv          time [s], P, Q: active and reactive power at the location\n"
           "participation.csv     location, score: EDMD participation in the target mode (max = 1)\n"
           "def.csv               location, energy_rate: dissipating energy flow slope (> 0 injects)\n"
           "qv.csv                location, phase_deg, in_phase: Q-V phase at the oscillation frequency\n";
  }
  return written;
}

}  // namespace oscl
