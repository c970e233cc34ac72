#include "oscl/lifting.hpp"

#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "oscl/errors.hpp"
#include "oscl/parallel.hpp"

namespace oscl {

const char* to_string(ObservableKind k) {
  switch (k) {
    case ObservableKind::RawMagnitude: return "RawMagnitude";
    case ObservableKind::RawAngle: return "RawAngle";
    case ObservableKind::ActivePower: return "ActivePower";
    case ObservableKind::ReactivePower: return "ReactivePower";
    case ObservableKind::Polynomial: return "Polynomial";
    case ObservableKind::Trig: return "Trig";
  }
  return "?";
}

PowerSeries compute_pq(const PhasorChannel& v, const PhasorChannel& i) {
  if (v.quantity != Quantity::Voltage || i.quantity != Quantity::Current)
    throw TypeError("compute_pq expects a voltage channel and a current channel");
  if (v.location_id != i.location_id)
    throw TypeError(fmt::format("compute_pq: voltage is loc{}, current is loc{}", v.location_id, i.location_id));
  if (v.size() != i.size() || v.angle.size() != v.size() || i.angle.size() != i.size())
    throw DataError(fmt::format("loc{}: voltage and current lengths differ", v.location_id));
  PowerSeries out;
  out.p.resize(v.size());
  out.q.resize(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double s = v.magnitude[k] * i.magnitude[k];
    const double d = v.angle[k] - i.angle[k];
    out.p[k] = s * std::cos(d);
    out.q[k] = s * std::sin(d);
  }
  return out;
}

std::vector<ObservableDef> build_dictionary(const EventDataset& ds, const DictionaryConfig& config) {
  const auto ids = ds.locations();
  if (ids.empty()) throw DataError("cannot build a dictionary for an empty dataset");
  if (config.p_degree < 1 || config.q_degree < 1) throw ValidationError("polynomial degree must be >= 1");

  std::vector<ObservableDef> dict;
  for (int id : ids) {
    const std::vector<std::string> vi = {fmt::format("loc{}_V", id), fmt::format("loc{}_I", id)};
    dict.push_back({fmt::format("P@loc{}", id), ObservableKind::ActivePower, id, ObservableKind::ActivePower, 1, vi});
    dict.push_back({fmt::format("Q@loc{}", id), ObservableKind::ReactivePower, id, ObservableKind::ReactivePower, 1, vi});
    for (int d = 2; d <= config.p_degree; ++d)
      dict.push_back({fmt::format("P^{}@loc{}", d, id), ObservableKind::Polynomial, id, ObservableKind::ActivePower, d, vi});
    for (int d = 2; d <= config.q_degree; ++d)
      dict.push_back({fmt::format("Q^{}@loc{}", d, id), ObservableKind::Polynomial, id, ObservableKind::ReactivePower, d, vi});
    if (config.voltage_magnitude)
      dict.push_back({fmt::format("V@loc{}", id), ObservableKind::RawMagnitude, id, ObservableKind::RawMagnitude, 1, {vi[0]}});
    if (config.voltage_angle)
      dict.push_back({fmt::format("thetaV@loc{}", id), ObservableKind::RawAngle, id, ObservableKind::RawAngle, 1, {vi[0]}});
    if (config.trig) {
      dict.push_back({fmt::format("cos_dtheta@loc{}", id), ObservableKind::Trig, id, ObservableKind::RawAngle, 1, vi});
      dict.push_back({fmt::format("sin_dtheta@loc{}", id), ObservableKind::Trig, id, ObservableKind::RawMagnitude, 1, vi});
    }
  }
  return dict;
}

Eigen::MatrixXd evaluate_observables(const EventDataset& ds, std::span<const ObservableDef> dict) {
  const auto n = static_cast<Eigen::Index>(ds.samples());
  Eigen::MatrixXd lifted(static_cast<Eigen::Index>(dict.size()), n);
  parallel_for(dict.size(), [&](std::size_t r) {
    const auto& def = dict[r];
    const auto& v = ds.voltage(def.location_id);
    const auto& i = ds.current(def.location_id);
    auto row = lifted.row(static_cast<Eigen::Index>(r));
    switch (def.kind) {
      case ObservableKind::RawMagnitude:
        for (Eigen::Index k = 0; k < n; ++k) row(k) = v.magnitude[static_cast<std::size_t>(k)];
        break;
      case ObservableKind::RawAngle:
        for (Eigen::Index k = 0; k < n; ++k) row(k) = v.angle[static_cast<std::size_t>(k)];
        break;
      case ObservableKind::Trig:
        for (Eigen::Index k = 0; k < n; ++k) {
          const double d = v.angle[static_cast<std::size_t>(k)] - i.angle[static_cast<std::size_t>(k)];
          row(k) = def.base == ObservableKind::RawAngle ? std::cos(d) : std::sin(d);
        }
        break;
      case ObservableKind::ActivePower:
      case ObservableKind::ReactivePower:
      case ObservableKind::Polynomial: {
        const auto pq = compute_pq(v, i);
        const bool active = def.kind == ObservableKind::ActivePower ||
                            (def.kind == ObservableKind::Polynomial && def.base == ObservableKind::ActivePower);
        const auto& src = active ? pq.p : pq.q;
        for (Eigen::Index k = 0; k < n; ++k) row(k) = std::pow(src[static_cast<std::size_t>(k)], def.degree);
        break;
      }
    }
  });
  return lifted;
}

SnapshotMatrices make_snapshots(const Eigen::MatrixXd& lifted, std::vector<std::string> names, double dt) {
  if (lifted.cols() < 2) throw LengthError("need at least 2 samples to form shift pairs");
  if (static_cast<Eigen::Index>(names.size()) != lifted.rows())
    throw ValidationError("observable names do not match lifted rows");
  for (Eigen::Index r = 0; r < lifted.rows(); ++r) {
    if (!lifted.row(r).allFinite())
      throw DataError(fmt::format("observable {} has non-finite values", names[static_cast<std::size_t>(r)]));
  }
  Eigen::MatrixXd centered = lifted.colwise() - lifted.rowwise().mean();
  const auto m = lifted.cols() - 1;
  SnapshotMatrices snap;
  snap.X = centered.leftCols(m);
  snap.Y = centered.rightCols(m);
  snap.dt = dt;
  snap.observable_names = std::move(names);
  if (m < snap.X.rows()) {
    snap.warnings.push_back(
        fmt::format("only {} snapshots for {} observables; operator is underdetermined", m, snap.X.rows()));
  }
  return snap;
}

SnapshotMatrices lift_snapshots(const EventDataset& ds, std::span<const ObservableDef> dict) {
  std::vector<std::string> names;
  for (const auto& d : dict) names.push_back(d.name);
  return make_snapshots(evaluate_observables(ds, dict), std::move(names), 1.0 / ds.sample_rate);
}

void to_json(nlohmann::json& j, const ObservableDef& def) {
  j = nlohmann::json{{"name", def.name},
                     {"kind", to_string(def.kind)},
                     {"location", def.location_id},
                     {"degree", def.degree},
                     {"provenance", def.provenance}};
}

}  // namespace oscl
