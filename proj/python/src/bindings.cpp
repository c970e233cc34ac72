#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "oscl/cli.hpp"
#include "oscl/edmd.hpp"
#include "oscl/errors.hpp"
#include "oscl/pipeline.hpp"
#include "oscl/report.hpp"
#include "oscl/signal_prep.hpp"
#include "oscl/synth.hpp"

namespace py = pybind11;
using namespace oscl;

namespace {

// Structured results cross the boundary as JSON text; the Python package
// decodes them into dicts.

std::string analyze(const std::string& csv_path, const std::string& options_json) {
  const auto options = options_from_json(nlohmann::json::parse(options_json));
  const auto raw = load_event_csv(csv_path);
  py::gil_scoped_release release;
  const auto result = run_analysis(raw, options);
  return build_report(result, options, sha256_file(csv_path)).dump();
}

std::string synth(const std::string& out_csv, const std::string& scenario_json) {
  const auto scenario = nlohmann::json::parse(scenario_json).get<SynthScenario>();
  const auto ev = generate_event(scenario);
  write_event_csv(ev.dataset, out_csv);
  nlohmann::json truth = ev.truth;
  truth["scenario"] = scenario;
  truth["attenuation"] = ev.attenuation;
  truth["hops"] = ev.hops;
  return truth.dump();
}

py::dict dominant_frequency(const Eigen::MatrixXd& signals, double sample_rate, std::pair<double, double> band) {
  std::vector<std::vector<double>> rows;
  for (Eigen::Index r = 0; r < signals.rows(); ++r) {
    rows.emplace_back(static_cast<std::size_t>(signals.cols()));
    for (Eigen::Index c = 0; c < signals.cols(); ++c) rows.back()[static_cast<std::size_t>(c)] = signals(r, c);
  }
  const auto peak = detect_dominant_frequency(rows, sample_rate, band);
  py::dict d;
  d["frequency_hz"] = peak.frequency_hz;
  d["amplitude"] = peak.amplitude;
  d["resolution_hz"] = peak.resolution_hz;
  d["peak_to_floor"] = peak.peak_to_floor;
  return d;
}

FilterSpec make_filter(const std::string& kind, int order, std::vector<double> edges, double sample_rate) {
  if (kind == "lowpass") return design_butterworth(FilterKind::LowPass, order, std::move(edges), sample_rate);
  if (kind == "bandpass") return design_butterworth(FilterKind::BandPass, order, std::move(edges), sample_rate);
  throw UsageError("filter kind must be 'lowpass' or 'bandpass'");
}

py::dict edmd(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double dt, std::optional<int> rank) {
  const auto gram = assemble_gram(X, Y);
  const auto svd = svd_gram(gram);
  const auto choice = choose_rank({svd.sigma.data(), static_cast<std::size_t>(svd.sigma.size())}, rank);
  const auto model = reduce_and_decompose(gram, svd, dt, choice.rank);
  py::dict d;
  d["rank"] = model.rank_r;
  d["singular_values"] = Eigen::VectorXd(model.singular_values);
  d["eigenvalues"] = Eigen::VectorXcd(model.mu);
  d["right_eigenvectors"] = Eigen::MatrixXcd(model.Phi_hat);
  d["left_eigenvectors"] = Eigen::MatrixXcd(model.Xi_hat);
  Eigen::MatrixXcd p(model.Phi_hat.rows(), model.Phi_hat.cols());
  for (Eigen::Index i = 0; i < p.cols(); ++i) p.col(i) = model.Phi_hat.col(i).cwiseProduct(model.Xi_hat.row(i).transpose());
  d["participation"] = p;
  d["warnings"] = model.warnings;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Oscillation contributor localisation core";

  static py::exception<Error> base(m, "OsclError");
  static py::exception<NoDominantModeError> no_mode(m, "NoDominantModeError", base.ptr());
  static py::exception<ConditioningError> conditioning(m, "ConditioningError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const NoDominantModeError& e) {
      py::set_error(no_mode, e.what());
    } catch (const ConditioningError& e) {
      py::set_error(conditioning, e.what());
    } catch (const Error& e) {
      py::set_error(base, (std::string(e.kind()) + ": " + e.what()).c_str());
    } catch (const nlohmann::json::exception& e) {
      py::set_error(PyExc_ValueError, e.what());
    }
  });

  m.attr("__version__") = std::string(kToolVersion);
  m.def("analyze_json", &analyze, py::arg("csv_path"), py::arg("options_json"));
  m.def("synth_json", &synth, py::arg("out_csv"), py::arg("scenario_json"));
  m.def("default_options_json", [] { return options_to_json(AnalysisOptions{}).dump(); });
  m.def("dominant_frequency", &dominant_frequency, py::arg("signals"), py::arg("sample_rate"),
        py::arg("band") = kDefaultSearchBand);
  m.def(
      "filter_sections",
      [](const std::string& kind, int order, std::vector<double> edges, double fs) {
        return make_filter(kind, order, std::move(edges), fs).sections;
      },
      py::arg("kind"), py::arg("order"), py::arg("edges_hz"), py::arg("sample_rate"));
  m.def(
      "zero_phase_filter",
      [](const std::vector<double>& x, const std::string& kind, int order, std::vector<double> edges, double fs) {
        return apply_zero_phase(make_filter(kind, order, std::move(edges), fs), x);
      },
      py::arg("x"), py::arg("kind"), py::arg("order"), py::arg("edges_hz"), py::arg("sample_rate"));
  m.def("edmd", &edmd, py::arg("X"), py::arg("Y"), py::arg("dt") = 1.0, py::arg("rank") = py::none());
  m.def(
      "run_cli", [](const std::vector<std::string>& args) { return run_cli(args); }, py::arg("args"));
}
