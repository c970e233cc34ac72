#include <doctest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "oscl/edmd.hpp"
#include "oscl/errors.hpp"

using namespace oscl;

namespace {

Eigen::Matrix2d rotation(double angle, double scale) {
  Eigen::Matrix2d r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return scale * r;
}

// Noiseless trajectory of x+ = A x from x0 as an (n x N) series.
Eigen::MatrixXd trajectory(const Eigen::MatrixXd& A, Eigen::VectorXd x, int n) {
  Eigen::MatrixXd out(A.rows(), n);
  for (int k = 0; k < n; ++k) {
    out.col(k) = x;
    x = A * x;
  }
  return out;
}

KoopmanModel fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, int rank, double dt = 0.02) {
  const auto gram = assemble_gram(X, Y);
  return reduce_and_decompose(gram, svd_gram(gram), dt, rank);
}

ModeEstimate mode_of(const KoopmanModel& model, Eigen::Index i) {
  ModeEstimate m;
  m.mu = model.mu(i);
  m.mode_index = static_cast<int>(i);
  return m;
}

ModeEstimate synthetic_mode(double f, double zeta, double sign = 1.0) {
  ModeEstimate m;
  m.frequency_hz = f;
  m.damping_ratio = zeta;
  const double w = 2.0 * oracle::kPi * f;
  m.lambda = {-zeta * w / std::sqrt(1.0 - zeta * zeta), sign * w};
  return m;
}

}  // namespace

TEST_SUITE("edmd") {
  TEST_CASE("Gram matrices of a single outer product") {
    Eigen::MatrixXd X(2, 1), Y(2, 1);
    X << 1, 0;
    Y << 0, 1;
    const auto g = assemble_gram(X, Y);
    Eigen::Matrix2d G, H;
    G << 1, 0, 0, 0;
    H << 0, 1, 0, 0;
    CHECK(g.G.isApprox(G));
    CHECK(g.H.isApprox(H));
    CHECK(g.M == 1);
  }

  TEST_CASE("X = Y gives H = G") {
    const Eigen::MatrixXd X = Eigen::MatrixXd::Random(4, 30);
    const auto g = assemble_gram(X, X);
    CHECK((g.G - g.H).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("Gram matrices match per-snapshot accumulation") {
    const Eigen::MatrixXd X = Eigen::MatrixXd::Random(5, 200);
    const Eigen::MatrixXd Y = Eigen::MatrixXd::Random(5, 200);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(5, 5), H = Eigen::MatrixXd::Zero(5, 5);
    for (int j = 0; j < 200; ++j) {
      for (int a = 0; a < 5; ++a) {
        for (int b = 0; b < 5; ++b) {
          G(a, b) += X(a, j) * X(b, j) / 200.0;
          H(a, b) += X(a, j) * Y(b, j) / 200.0;
        }
      }
    }
    const auto g = assemble_gram(X, Y);
    CHECK((g.G - G).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((g.H - H).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("Gram input validation") {
    CHECK_THROWS_AS(assemble_gram(Eigen::MatrixXd(2, 3), Eigen::MatrixXd(2, 4)), ValidationError);
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(2, 3);
    X(1, 1) = std::nan("");
    CHECK_THROWS_AS(assemble_gram(X, Eigen::MatrixXd::Ones(2, 3)), NumericError);
  }

  TEST_CASE("elbow rank") {
    const std::vector<double> sigma = {10, 9, 8, 1e-3, 1e-4, 1e-5, 1e-6};
    const auto c = choose_rank(sigma);
    CHECK(c.rank == 3);
    CHECK_FALSE(c.overridden);
  }

  TEST_CASE("rank override") {
    const std::vector<double> sigma(10, 1.0);
    auto c = choose_rank(sigma, 7);
    CHECK(c.rank == 7);
    CHECK(c.overridden);
    c = choose_rank(sigma, 40);
    CHECK(c.rank == 10);
    CHECK_FALSE(c.warnings.empty());
  }

  TEST_CASE("degenerate spectrum caps the rank with a warning") {
    const std::vector<double> sigma = {1.0, 1e-13};
    const auto c = choose_rank(sigma);
    CHECK(c.rank == 1);
    CHECK_FALSE(c.warnings.empty());
  }

  TEST_CASE("rank never drops below a conjugate pair") {
    const std::vector<double> sigma = {100, 1e-2, 1e-3, 1e-4};
    CHECK(choose_rank(sigma).rank == 2);
    CHECK_THROWS_AS(choose_rank(std::vector<double>{1.0, 2.0}), ValidationError);
  }

  TEST_CASE("pseudoinverse satisfies the Penrose conditions") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Random(6, 4);
    A.col(3) = A.col(0) + A.col(1);
    const auto P = pinv(A);
    CHECK((A * P * A - A).norm() < 1e-12);
    CHECK((P * A * P - P).norm() < 1e-12);
    CHECK(((A * P).transpose() - A * P).norm() < 1e-12);
  }

  TEST_CASE("scaled rotation is recovered exactly") {
    const Eigen::MatrixXd A = rotation(0.1, 0.99);
    const auto series = trajectory(A, Eigen::Vector2d(1.0, 0.3), 200);
    const auto model = fit(series.leftCols(199), series.rightCols(199), 2);
    const std::complex<double> expected = std::polar(0.99, 0.1);
    for (Eigen::Index i = 0; i < 2; ++i) {
      const auto mu = model.mu(i);
      CHECK(std::min(std::abs(mu - expected), std::abs(mu - std::conj(expected))) < 1e-8);
    }
    CHECK(model.biorthogonality_error < 1e-10);
  }

  TEST_CASE("static data gives unit eigenvalues") {
    const Eigen::MatrixXd X = Eigen::MatrixXd::Random(1, 50);
    const auto model = fit(X, X, 1);
    CHECK(std::abs(model.mu(0) - 1.0) < 1e-10);
    const Eigen::MatrixXd X3 = Eigen::MatrixXd::Random(3, 50);
    const auto model3 = fit(X3, X3, 3);
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(std::abs(model3.mu(i) - 1.0) < 1e-10);
  }

  TEST_CASE("full rank matches the direct pseudoinverse route") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::MatrixXd X = Eigen::MatrixXd::Random(5, 100);
      const Eigen::MatrixXd Y = Eigen::MatrixXd::Random(5, 5) * X + 0.1 * Eigen::MatrixXd::Random(5, 100);
      const auto gram = assemble_gram(X, Y);
      const auto model = reduce_and_decompose(gram, svd_gram(gram), 0.02, 5);
      const Eigen::VectorXcd direct = Eigen::EigenSolver<Eigen::MatrixXd>(pinv(gram.G) * gram.H).eigenvalues();
      for (Eigen::Index i = 0; i < 5; ++i) CHECK(std::abs(direct(oracle::closest(direct, model.mu(i))) - model.mu(i)) < 1e-8);
    }
  }

  TEST_CASE("rank validation") {
    const Eigen::MatrixXd X = Eigen::MatrixXd::Random(3, 50);
    const auto gram = assemble_gram(X, X);
    CHECK_THROWS_AS(reduce_and_decompose(gram, svd_gram(gram), 0.02, 0), ValidationError);
    CHECK_THROWS_AS(reduce_and_decompose(gram, svd_gram(gram), 0.02, 4), ValidationError);
    Eigen::MatrixXd low = X;
    low.row(2) = low.row(0);
    const auto g2 = assemble_gram(low, low);
    CHECK_THROWS_AS(reduce_and_decompose(g2, svd_gram(g2), 0.02, 3), NumericError);
  }

  TEST_CASE("rigid mode") {
    KoopmanModel model;
    model.dt = 0.02;
    model.mu = Eigen::VectorXcd::Ones(1);
    model.Phi_hat = Eigen::MatrixXcd::Ones(1, 1);
    const auto modes = to_continuous(model).modes;
    REQUIRE(modes.size() == 1);
    CHECK(modes[0].rigid);
    CHECK(std::isnan(modes[0].damping_ratio));
    CHECK(modes[0].frequency_hz == 0.0);
    const nlohmann::json j = modes[0];
    CHECK(j["damping_ratio"] == "none");
  }

  TEST_CASE("continuous-time conversion of a 0.158 Hz mode") {
    const std::complex<double> lambda(-0.05, 2.0 * oracle::kPi * 0.158);
    KoopmanModel model;
    model.dt = 0.02;
    model.mu = Eigen::VectorXcd::Constant(1, std::exp(lambda * 0.02));
    model.Phi_hat = Eigen::MatrixXcd::Ones(1, 1);
    const auto m = to_continuous(model).modes.at(0);
    CHECK(std::abs(m.lambda - lambda) < 1e-10);
    CHECK(m.lambda.imag() == doctest::Approx(0.99274).epsilon(1e-4));
    CHECK(m.frequency_hz == doctest::Approx(0.158).epsilon(1e-12));
    CHECK(m.damping_ratio == doctest::Approx(0.05 / std::abs(lambda)).epsilon(1e-10));
    CHECK(m.damping_ratio == doctest::Approx(0.0503).epsilon(1e-3));
  }

  TEST_CASE("negative real eigenvalue is a Nyquist mode") {
    KoopmanModel model;
    model.dt = 0.02;
    model.mu = Eigen::VectorXcd::Constant(1, -0.9);
    model.Phi_hat = Eigen::MatrixXcd::Ones(1, 1);
    const auto list = to_continuous(model);
    const auto& m = list.modes.at(0);
    CHECK(m.nyquist);
    CHECK(std::abs(m.lambda - std::complex<double>(std::log(0.9), oracle::kPi) / 0.02) < 1e-9);
    CHECK_FALSE(list.warnings.empty());
  }

  TEST_CASE("modes sort by damping, rigid last") {
    KoopmanModel model;
    model.dt = 0.02;
    model.mu.resize(3);
    model.mu << 1.0, std::polar(0.9, 0.1), std::polar(0.999, 0.1);
    model.Phi_hat = Eigen::MatrixXcd::Ones(1, 3);
    const auto modes = to_continuous(model).modes;
    CHECK(modes[0].mode_index == 2);
    CHECK(modes[1].mode_index == 1);
    CHECK(modes[2].rigid);
  }

  TEST_CASE("target mode selection") {
    std::vector<ModeEstimate> modes = {synthetic_mode(0.10, 0.05), synthetic_mode(0.158, 0.05),
                                       synthetic_mode(0.31, 0.05)};
    auto t = select_target_mode(modes, 0.158);
    CHECK(t.in_band);
    CHECK(t.mode.frequency_hz == 0.158);

    modes = {synthetic_mode(0.158, 0.2), synthetic_mode(0.158, 0.01)};
    CHECK(select_target_mode(modes, 0.158).mode.damping_ratio == 0.01);

    modes = {synthetic_mode(0.158, 0.01, -1.0), synthetic_mode(0.158, 0.01, 1.0)};
    CHECK(select_target_mode(modes, 0.158).mode.lambda.imag() > 0.0);

    modes = {synthetic_mode(0.5, 0.05)};
    t = select_target_mode(modes, 0.158);
    CHECK_FALSE(t.in_band);
    CHECK(t.mode.frequency_hz == 0.5);
    CHECK_FALSE(t.warnings.empty());
  }

  TEST_CASE("one observable participates fully") {
    Eigen::MatrixXd series(1, 100);
    for (int k = 0; k < 100; ++k) series(0, k) = std::pow(0.95, k);
    const auto model = fit(series.leftCols(99), series.rightCols(99), 1);
    const std::vector<int> loc = {7};
    const auto rep = participation(model, mode_of(model, 0), loc);
    CHECK(std::abs(rep.p_complex(0) - 1.0) < 1e-12);
    CHECK(rep.p_location.at(7) == doctest::Approx(1.0));
    CHECK(rep.ranking == std::vector<int>{7});
  }

  TEST_CASE("block-diagonal system localises each mode") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(4, 4);
    A.block<2, 2>(0, 0) = rotation(0.1, 0.99);
    A.block<2, 2>(2, 2) = rotation(0.5, 0.9);
    std::mt19937_64 rng(1);
    const auto [X, Y] = oracle::random_pairs(A, 400, rng);
    const auto model = fit(X, Y, 4);
    const std::vector<int> loc = {1, 1, 2, 2};
    const auto target = oracle::closest(model.mu, std::polar(0.99, 0.1));
    const auto rep = participation(model, mode_of(model, target), loc);
    CHECK(rep.p_location.at(1) == doctest::Approx(1.0));
    CHECK(rep.p_location.at(2) < 1e-6);
    CHECK(rep.ranking.front() == 1);
  }

  TEST_CASE("participation matches classical factors on random systems") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
      const auto sys = oracle::random_stable_system(3, rng);
      const auto [X, Y] = oracle::random_pairs(sys.A, 300, rng);
      const auto model = fit(X, Y, 6);
      const auto classical = oracle::classical_participation(sys.A);
      for (Eigen::Index i = 0; i < 6; ++i) {
        const auto c = oracle::closest(classical.eigenvalues, model.mu(i));
        const std::vector<int> loc = {1, 2, 3, 4, 5, 6};
        const auto rep = participation(model, mode_of(model, i), loc);
        CHECK((rep.p_complex - classical.participation.col(c)).cwiseAbs().maxCoeff() < 1e-6);
        CHECK(std::abs(rep.trace - 1.0) < 1e-8);
      }
    }
  }

  TEST_CASE("participation rejects a mismatched location map") {
    const Eigen::MatrixXd X = Eigen::MatrixXd::Random(2, 50);
    const auto model = fit(X, X, 2);
    const std::vector<int> loc = {1};
    CHECK_THROWS_AS(participation(model, mode_of(model, 0), loc), ValidationError);
  }

  TEST_CASE("model serialises eigenvalues as pairs") {
    const auto series = trajectory(rotation(0.1, 0.99), Eigen::Vector2d(1.0, 0.0), 50);
    const auto model = fit(series.leftCols(49), series.rightCols(49), 2);
    const nlohmann::json j = model;
    CHECK(j["eigenvalues"].size() == 2);
    CHECK(j["eigenvalues"][0].size() == 2);
    CHECK(j["rank"] == 2);
  }
}
