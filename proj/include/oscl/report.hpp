#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "oscl/pipeline.hpp"

namespace oscl {

inline constexpr std::string_view kToolVersion = "0.1.0";

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

/// Effective values of every analysis option (defaults materialised).
nlohmann::json options_to_json(const AnalysisOptions& options);
AnalysisOptions options_from_json(const nlohmann::json& j);

/// Self-contained analysis report. Holds no timestamp, so identical inputs
/// and options give byte-identical output.
nlohmann::json build_report(const AnalysisResult& result, const AnalysisOptions& options,
                            const std::string& dataset_fingerprint);

void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);

inline const std::vector<std::string> kAllPlots = {"timeseries", "pq", "participation", "def", "qv"};

/// Writes tidy CSV plot-data files plus a README describing their columns.
/// Returns the files written. Requesting `def` or `qv` without the matching
/// report section is an error.
std::vector<std::string> write_plot_data(const nlohmann::json& report, const EventDataset& raw,
                                         const std::string& out_dir, const std::vector<std::string>& plots);

}  // namespace oscl
