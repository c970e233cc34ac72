#include "oscl/edmd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "oscl/errors.hpp"

namespace oscl {

namespace {

template <typename Matrix>
Matrix pinv_impl(const Matrix& A, double relative_cutoff) {
  if (A.size() == 0) return Matrix(A.cols(), A.rows());
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cutoff = relative_cutoff * (s.size() > 0 ? s(0) : 0.0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s(k) > cutoff) inv(k) = 1.0 / s(k);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

}  // namespace

GramPair assemble_gram(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  if (X.rows() != Y.rows() || X.cols() != Y.cols())
    throw ValidationError("X and Y must have identical shape");
  if (X.cols() == 0) throw ValidationError("no snapshots");
  if (!X.allFinite() || !Y.allFinite()) throw NumericError("snapshot matrices contain non-finite entries");
  GramPair gram;
  gram.M = X.cols();
  const double inv_m = 1.0 / static_cast<double>(gram.M);
  Eigen::MatrixXd G = inv_m * (X * X.transpose());
  gram.G = 0.5 * (G + G.transpose());
  gram.H = inv_m * (X * Y.transpose());
  return gram;
}

GramPair assemble_gram(const SnapshotMatrices& snap) { return assemble_gram(snap.X, snap.Y); }

RankChoice choose_rank(std::span<const double> sigma, std::optional<int> override_rank) {
  if (sigma.empty()) throw ValidationError("singular value list is empty");
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    if (!(sigma[k] >= 0.0) || (k > 0 && sigma[k] > sigma[k - 1]))
      throw ValidationError("singular values must be non-negative and descending");
  }
  RankChoice choice;
  const int n = static_cast<int>(sigma.size());
  if (override_rank) {
    choice.rank = std::clamp(*override_rank, 1, n);
    choice.overridden = true;
    if (choice.rank != *override_rank)
      choice.warnings.push_back(fmt::format("rank override {} clamped to {}", *override_rank, choice.rank));
    return choice;
  }
  if (sigma[0] == 0.0) throw NumericError("all singular values are zero");

  const double cutoff = kRelativeCutoff * sigma[0];
  const auto count = static_cast<int>(
      std::count_if(sigma.begin(), sigma.end(), [cutoff](double s) { return s > cutoff; }));
  if (count < 2) {
    choice.rank = count;
    choice.warnings.push_back(
        fmt::format("only {} singular value(s) above the cutoff; rank {} cannot hold a conjugate pair", count, count));
    return choice;
  }
  if (count == 2) {
    choice.rank = 2;
    return choice;
  }
  std::vector<double> l(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) l[static_cast<std::size_t>(k)] = std::log10(sigma[static_cast<std::size_t>(k)]);
  int best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int j = 0; j + 2 < count; ++j) {
    const auto u = static_cast<std::size_t>(j);
    const double d2 = l[u] - 2.0 * l[u + 1] + l[u + 2];
    if (d2 > best_value) {
      best_value = d2;
      best = j;
    }
  }
  choice.rank = std::min(std::max(best + 1, 2), count);
  return choice;
}

Eigen::MatrixXd pinv(const Eigen::MatrixXd& A, double relative_cutoff) { return pinv_impl(A, relative_cutoff); }
Eigen::MatrixXcd pinv(const Eigen::MatrixXcd& A, double relative_cutoff) { return pinv_impl(A, relative_cutoff); }

GramSvd svd_gram(const GramPair& gram) {
  if (!gram.G.allFinite() || !gram.H.allFinite()) throw NumericError("Gram matrices contain non-finite entries");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(gram.G, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

KoopmanModel reduce_and_decompose(const GramPair& gram, const SnapshotMatrices& snap, int rank) {
  return reduce_and_decompose(gram, svd_gram(gram), snap.dt, rank);
}

KoopmanModel reduce_and_decompose(const GramPair& gram, const GramSvd& svd, double dt, int rank) {
  const auto n = svd.sigma.size();
  if (rank < 1 || rank > n) throw ValidationError(fmt::format("rank {} outside [1, {}]", rank, n));
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  const double cutoff = kRelativeCutoff * svd.sigma(0);
  const auto above = (svd.sigma.array() > cutoff).count();
  if (rank > above) {
    throw NumericError(fmt::format("rank {} exceeds the {} singular values above the cutoff", rank, above));
  }

  KoopmanModel model;
  model.rank_r = rank;
  model.dt = dt;
  model.singular_values = svd.sigma;
  model.U_r = svd.U.leftCols(rank);
  model.R_r = svd.R.leftCols(rank);
  model.sigma_r = svd.sigma.head(rank);
  model.M_reduced = model.U_r.transpose() * gram.H.transpose() * model.R_r *
                    model.sigma_r.cwiseInverse().asDiagonal();

  Eigen::EigenSolver<Eigen::MatrixXd> eig(model.M_reduced, true);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition of the reduced operator failed");
  model.mu = eig.eigenvalues();
  model.Phi_tilde = eig.eigenvectors();
  for (Eigen::Index i = 0; i < rank; ++i) {
    const double norm = model.Phi_tilde.col(i).norm();
    if (norm > 0.0) model.Phi_tilde.col(i) /= norm;
  }

  const Eigen::MatrixXcd M = model.M_reduced.cast<std::complex<double>>();
  const double scale = std::max(1.0, model.M_reduced.norm());
  for (Eigen::Index i = 0; i < rank; ++i) {
    const double res = (M * model.Phi_tilde.col(i) - model.mu(i) * model.Phi_tilde.col(i)).norm();
    model.max_eigen_residual = std::max(model.max_eigen_residual, res / scale);
  }
  if (model.max_eigen_residual > 1e-10) {
    model.warnings.push_back(fmt::format("eigenvector residual {:.3e} exceeds 1e-10", model.max_eigen_residual));
  }

  model.Phi_hat = model.U_r.cast<std::complex<double>>() * model.Phi_tilde;
  model.Xi_hat = pinv(model.Phi_hat);
  const Eigen::MatrixXcd gap = model.Xi_hat * model.Phi_hat - Eigen::MatrixXcd::Identity(rank, rank);
  model.biorthogonality_error = gap.cwiseAbs().maxCoeff();
  if (model.biorthogonality_error > kBiorthogonalityWarning) {
    model.warnings.push_back(fmt::format("left/right eigenvectors are ill-conditioned: |Xi Phi - I| = {:.3e}",
                                         model.biorthogonality_error));
  }
  return model;
}

ModeList to_continuous(const KoopmanModel& model) {
  ModeList out;
  const double nyquist_arg = std::numbers::pi * (1.0 - 1e-9);
  for (Eigen::Index i = 0; i < model.mu.size(); ++i) {
    const auto mu = model.mu(i);
    if (std::abs(mu) == 0.0) {
      out.warnings.push_back(fmt::format("mode {} has a zero eigenvalue and was dropped", i));
      continue;
    }
    ModeEstimate m;
    m.mu = mu;
    m.mode_index = static_cast<int>(i);
    m.mode_shape = model.Phi_hat.col(i);
    const auto log_mu = std::log(mu);
    m.lambda = log_mu / model.dt;
    m.frequency_hz = std::abs(m.lambda.imag()) / (2.0 * std::numbers::pi);
    if (std::abs(log_mu) <= 1e-9) {
      m.rigid = true;
      m.damping_ratio = std::numeric_limits<double>::quiet_NaN();
    } else {
      m.damping_ratio = -m.lambda.real() / std::abs(m.lambda);
    }
    if (std::abs(log_mu.imag()) >= nyquist_arg) {
      m.nyquist = true;
      out.warnings.push_back(fmt::format("mode {} sits at the Nyquist frequency (out of band)", i));
    }
    out.modes.push_back(std::move(m));
  }
  std::stable_sort(out.modes.begin(), out.modes.end(), [](const ModeEstimate& a, const ModeEstimate& b) {
    const bool an = std::isnan(a.damping_ratio), bn = std::isnan(b.damping_ratio);
    if (an != bn) return bn;
    if (an) return false;
    return a.damping_ratio < b.damping_ratio;
  });
  return out;
}

TargetMode select_target_mode(std::span<const ModeEstimate> modes, double f_s) {
  if (modes.empty()) throw ValidationError("no modes to choose from");
  const double tol = 1e-9 * std::max(f_s, 1e-12);
  const auto better = [&](const ModeEstimate& a, const ModeEstimate& b) {
    const double da = std::abs(a.frequency_hz - f_s), db = std::abs(b.frequency_hz - f_s);
    if (std::abs(da - db) > tol) return da < db;
    const double za = std::isnan(a.damping_ratio) ? 2.0 : a.damping_ratio;
    const double zb = std::isnan(b.damping_ratio) ? 2.0 : b.damping_ratio;
    if (za != zb) return za < zb;
    return a.lambda.imag() > b.lambda.imag();
  };
  const ModeEstimate* best = nullptr;
  for (const auto& m : modes) {
    const bool in_band = std::abs(m.frequency_hz - f_s) <= kTargetBandRel * f_s;
    if (in_band && (!best || better(m, *best))) best = &m;
  }
  TargetMode target;
  if (!best) {
    for (const auto& m : modes) {
      if (!best || better(m, *best)) best = &m;
    }
    target.in_band = false;
    target.warnings.push_back(fmt::format("no mode within {:.0f}% of {:.4f} Hz; closest is {:.4f} Hz",
                                          kTargetBandRel * 100.0, f_s, best->frequency_hz));
  }
  target.mode = *best;
  return target;
}

ParticipationReport participation(const KoopmanModel& model, const ModeEstimate& mode,
                                  std::span<const int> location_of_observable) {
  const auto n = model.Phi_hat.rows();
  if (static_cast<Eigen::Index>(location_of_observable.size()) != n)
    throw ValidationError("observable-to-location map does not match the model");
  const auto i = mode.mode_index;
  if (i < 0 || i >= model.Phi_hat.cols()) throw ValidationError("mode does not belong to this model");

  ParticipationReport report;
  report.target_mode = mode;
  report.p_complex = model.Phi_hat.col(i).cwiseProduct(model.Xi_hat.row(i).transpose());
  report.trace = report.p_complex.sum();
  if (std::abs(report.trace - 1.0) > kTraceTolerance) {
    throw ConditioningError(fmt::format(
        "participation factors of mode {} sum to {:.6g}{:+.6g}i instead of 1; refusing to rank", i,
        report.trace.real(), report.trace.imag()));
  }
  report.p_observable = report.p_complex.cwiseAbs();
  for (Eigen::Index s = 0; s < n; ++s) {
    report.p_location[location_of_observable[static_cast<std::size_t>(s)]] += report.p_observable(s);
  }
  double top = 0.0;
  for (const auto& [id, score] : report.p_location) top = std::max(top, score);
  if (!(top > 0.0)) throw ConditioningError("all participation factors vanish");
  for (auto& [id, score] : report.p_location) score /= top;
  for (const auto& [id, score] : report.p_location) report.ranking.push_back(id);
  std::stable_sort(report.ranking.begin(), report.ranking.end(),
                   [&](int a, int b) { return report.p_location.at(a) > report.p_location.at(b); });
  return report;
}

ParticipationReport participation(const KoopmanModel& model, const ModeEstimate& mode,
                                  std::span<const ObservableDef> dict) {
  std::vector<int> loc;
  loc.reserve(dict.size());
  for (const auto& d : dict) loc.push_back(d.location_id);
  return participation(model, mode, loc);
}

namespace {
nlohmann::json complex_pair(std::complex<double> z) { return nlohmann::json::array({z.real(), z.imag()}); }
}  // namespace

void to_json(nlohmann::json& j, const KoopmanModel& model) {
  j = nlohmann::json::object();
  j["rank"] = model.rank_r;
  j["dt"] = model.dt;
  j["singular_values"] = std::vector<double>(model.singular_values.data(),
                                             model.singular_values.data() + model.singular_values.size());
  auto eig = nlohmann::json::array();
  for (Eigen::Index i = 0; i < model.mu.size(); ++i) eig.push_back(complex_pair(model.mu(i)));
  j["eigenvalues"] = eig;
  j["biorthogonality_error"] = model.biorthogonality_error;
  j["max_eigen_residual"] = model.max_eigen_residual;
  j["warnings"] = model.warnings;
}

void to_json(nlohmann::json& j, const ModeEstimate& mode) {
  j = nlohmann::json::object();
  j["mode_index"] = mode.mode_index;
  j["mu"] = complex_pair(mode.mu);
  j["lambda"] = complex_pair(mode.lambda);
  j["frequency_hz"] = mode.frequency_hz;
  if (std::isnan(mode.damping_ratio)) {
    j["damping_ratio"] = "none";
  } else {
    j["damping_ratio"] = mode.damping_ratio;
  }
  j["rigid"] = mode.rigid;
  j["nyquist"] = mode.nyquist;
  auto shape = nlohmann::json::array();
  for (Eigen::Index s = 0; s < mode.mode_shape.size(); ++s) shape.push_back(complex_pair(mode.mode_shape(s)));
  j["mode_shape"] = shape;
}

void to_json(nlohmann::json& j, const ParticipationReport& report) {
  j = nlohmann::json::object();
  j["target_mode"] = report.target_mode;
  j["trace"] = complex_pair(report.trace);
  auto per_obs = nlohmann::json::array();
  for (Eigen::Index s = 0; s < report.p_complex.size(); ++s) {
    per_obs.push_back({{"magnitude", report.p_observable(s)}, {"complex", complex_pair(report.p_complex(s))}});
  }
  j["p_observable"] = per_obs;
  auto per_loc = nlohmann::json::array();
  for (const auto& [id, score] : report.p_location) per_loc.push_back({{"location", id}, {"score", score}});
  j["p_location"] = per_loc;
  j["ranking"] = report.ranking;
}

}  // namespace oscl
