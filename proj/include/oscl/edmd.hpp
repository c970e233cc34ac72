#pragma once

#include <complex>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "oscl/lifting.hpp"

namespace oscl {

/// Singular values below this fraction of the largest are treated as zero,
/// both for rank selection and for every pseudoinverse.
inline constexpr double kRelativeCutoff = 1e-12;
inline constexpr double kTraceTolerance = 1e-6;
inline constexpr double kBiorthogonalityWarning = 1e-6;

struct GramPair {
  Eigen::MatrixXd G;  // (1/M) X X^T, symmetrised
  Eigen::MatrixXd H;  // (1/M) X Y^T
  Eigen::Index M = 0;
};

GramPair assemble_gram(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y);
GramPair assemble_gram(const SnapshotMatrices& snap);

struct RankChoice {
  int rank = 0;
  bool overridden = false;
  std::vector<std::string> warnings;
};

/// Elbow of the singular value curve: the largest second difference of
/// log10(sigma) over values above the cutoff, floored at 2 (room for one
/// conjugate pair) and capped at the number of values above the cutoff.
RankChoice choose_rank(std::span<const double> sigma, std::optional<int> override_rank = std::nullopt);

Eigen::MatrixXd pinv(const Eigen::MatrixXd& A, double relative_cutoff = kRelativeCutoff);
Eigen::MatrixXcd pinv(const Eigen::MatrixXcd& A, double relative_cutoff = kRelativeCutoff);

/// SVD of G = U Sigma R^T, singular values descending.
struct GramSvd {
  Eigen::MatrixXd U;
  Eigen::VectorXd sigma;
  Eigen::MatrixXd R;
};

GramSvd svd_gram(const GramPair& gram);

/// Reduced Koopman model in the transposed (M_K = K^T) convention.
///
/// The reduced operator is the Galerkin projection of M_K = H^T G^+ onto the
/// leading r left singular vectors of G:
///
///     M~ = U_r^T H^T R_r Sigma_r^{-1}
///
/// With this orientation the lifted eigenvectors Phi_hat = U_r Phi~ are right
/// eigenvectors of the full operator in observable-coefficient space, so for
/// a linear system x+ = A x with the identity dictionary M_K = A and Phi_hat
/// are the right eigenvectors of A. Xi_hat = pinv(Phi_hat) then holds the
/// matching left eigenvectors.
struct KoopmanModel {
  int rank_r = 0;
  Eigen::MatrixXd U_r;
  Eigen::VectorXd sigma_r;
  Eigen::MatrixXd R_r;
  Eigen::MatrixXd M_reduced;
  Eigen::VectorXcd mu;
  Eigen::MatrixXcd Phi_tilde;
  Eigen::MatrixXcd Phi_hat;  // n_d x r
  Eigen::MatrixXcd Xi_hat;   // r x n_d
  double dt = 0.0;
  Eigen::VectorXd singular_values;  // full spectrum of G
  double biorthogonality_error = 0.0;
  double max_eigen_residual = 0.0;
  std::vector<std::string> warnings;
};

KoopmanModel reduce_and_decompose(const GramPair& gram, const GramSvd& svd, double dt, int rank);
KoopmanModel reduce_and_decompose(const GramPair& gram, const SnapshotMatrices& snap, int rank);

struct ModeEstimate {
  std::complex<double> mu;
  std::complex<double> lambda;
  double frequency_hz = 0.0;
  double damping_ratio = 0.0;  // NaN for rigid modes
  int mode_index = 0;
  Eigen::VectorXcd mode_shape;
  bool rigid = false;
  bool nyquist = false;
};

struct ModeList {
  std::vector<ModeEstimate> modes;
  std::vector<std::string> warnings;
};

/// lambda = ln(mu) / dt on the principal branch, sorted by damping ratio
/// ascending (rigid modes last). Zero eigenvalues are dropped with a warning.
ModeList to_continuous(const KoopmanModel& model);

struct TargetMode {
  ModeEstimate mode;
  bool in_band = true;
  std::vector<std::string> warnings;
};

inline constexpr double kTargetBandRel = 0.2;

TargetMode select_target_mode(std::span<const ModeEstimate> modes, double f_s);

struct ParticipationReport {
  ModeEstimate target_mode;
  Eigen::VectorXcd p_complex;
  Eigen::VectorXd p_observable;
  std::map<int, double> p_location;
  std::vector<int> ranking;
  std::complex<double> trace;
};

/// Participation of each observable in `mode`: p_s = Phi_hat(s, i) Xi_hat(i, s).
/// Location scores sum |p_s| over the location's observables, normalised so
/// the top location scores 1. Throws ConditioningError when sum_s p_s
/// departs from 1 by more than kTraceTolerance.
ParticipationReport participation(const KoopmanModel& model, const ModeEstimate& mode,
                                  std::span<const int> location_of_observable);
ParticipationReport participation(const KoopmanModel& model, const ModeEstimate& mode,
                                  std::span<const ObservableDef> dict);

void to_json(nlohmann::json& j, const KoopmanModel& model);
void to_json(nlohmann::json& j, const ModeEstimate& mode);
void to_json(nlohmann::json& j, const ParticipationReport& report);

}  // namespace oscl
