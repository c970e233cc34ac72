#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "oscl/phasor_io.hpp"

namespace oscl {

enum class ObservableKind {
  RawMagnitude,   // voltage magnitude
  RawAngle,       // unwrapped voltage angle
  ActivePower,
  ReactivePower,
  Polynomial,     // power of P or Q, see `base`
  Trig,           // cos or sin of the V-I angle difference, see `base`
};

const char* to_string(ObservableKind k);

struct ObservableDef {
  std::string name;
  ObservableKind kind = ObservableKind::ActivePower;
  int location_id = 0;
  /// Polynomial: ActivePower or ReactivePower. Trig: RawAngle selects cos,
  /// RawMagnitude selects sin. Unused otherwise.
  ObservableKind base = ObservableKind::ActivePower;
  int degree = 1;
  std::vector<std::string> provenance;
};

struct DictionaryConfig {
  int p_degree = 1;  // adds P^2..P^d per location when > 1
  int q_degree = 1;
  bool voltage_magnitude = false;
  bool voltage_angle = false;
  bool trig = false;
};

struct PowerSeries {
  std::vector<double> p;
  std::vector<double> q;
};

/// P = V I cos(thV - thI), Q = V I sin(thV - thI), elementwise.
PowerSeries compute_pq(const PhasorChannel& v, const PhasorChannel& i);

std::vector<ObservableDef> build_dictionary(const EventDataset& ds, const DictionaryConfig& config = {});

/// Evaluates every observable on every sample: rows follow `dict` order.
Eigen::MatrixXd evaluate_observables(const EventDataset& ds, std::span<const ObservableDef> dict);

/// Lifted one-step shift pairs. X and Y are n_d x M with Y(:, j) the lifted
/// successor of X(:, j).
struct SnapshotMatrices {
  Eigen::MatrixXd X;
  Eigen::MatrixXd Y;
  double dt = 0.0;
  std::vector<std::string> observable_names;
  std::vector<std::string> warnings;

  Eigen::Index observables() const { return X.rows(); }
  Eigen::Index snapshots() const { return X.cols(); }
};

/// Row-wise mean removal followed by the shift-pair split of a lifted series
/// (n_d x N). Throws DataError naming the observable on non-finite values.
SnapshotMatrices make_snapshots(const Eigen::MatrixXd& lifted, std::vector<std::string> names, double dt);

/// evaluate_observables + make_snapshots on prepared (filtered, cropped) data.
SnapshotMatrices lift_snapshots(const EventDataset& ds, std::span<const ObservableDef> dict);

void to_json(nlohmann::json& j, const ObservableDef& def);

}  // namespace oscl
