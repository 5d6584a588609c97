#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dmdgraph/dmdc.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace dmdgraph;

namespace {

SnapshotSet<double> from_lti(const oracle::LtiData& d) {
  SnapshotSet<double> s;
  s.x = d.x;
  s.x_next = d.x_next;
  s.u = d.u;
  return s;
}

// x_{k+1} = 0.9 x_k + 0.1 u_k driven by a random input.
SnapshotSet<double> scalar_system(int steps) {
  std::mt19937_64 rng(3);
  Eigen::MatrixXd a(1, 1), b(1, 1);
  a << 0.9;
  b << 0.1;
  return from_lti(oracle::simulate_lti(a, b, Eigen::VectorXd::Ones(1), oracle::random_gaussian(rng, 1, steps)));
}

SnapshotSet<double> rotation_system(double theta, int steps) {
  const Eigen::MatrixXd a = oracle::rotation(theta);
  const Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2, 1);
  Eigen::VectorXd x0(2);
  x0 << 1.0, 0.3;
  return from_lti(oracle::simulate_lti(a, b, x0, Eigen::MatrixXd::Zero(1, steps)));
}

}  // namespace

TEST_CASE("constant series gives identity dynamics") {
  SnapshotSet<double> s;
  s.x = Eigen::MatrixXd::Constant(1, 50, 3.3);
  s.x_next = s.x;
  s.u = Eigen::MatrixXd::Zero(1, 50);
  const auto model = fit_checked(s, counts(1, 1));
  CHECK(model.a_tilde(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(model.eigenvalues(0).real() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(model.eigenvalues(0).imag() == 0.0);

  Eigen::VectorXd x(1), u(1);
  x << 3.3;
  u << 0.0;
  CHECK(predict_one_step(model, x, u)(0) == doctest::Approx(3.3).epsilon(1e-14));
}

TEST_CASE("scalar system recovered against the least-squares oracle") {
  const auto s = scalar_system(200);
  const auto model = fit_checked(s, counts(1, 2));
  const Eigen::MatrixXd ab = oracle::least_squares_operator(s.x, s.u, s.x_next);
  CHECK(ab(0, 0) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(ab(0, 1) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(std::abs(model.a_tilde(0, 0) - ab(0, 0)) <= 1e-8);
  CHECK(std::abs(model.b_tilde(0, 0) - ab(0, 1)) <= 1e-8);
  CHECK(std::abs(model.a_tilde(0, 0) - 0.9) <= 1e-8);
  CHECK(std::abs(model.b_tilde(0, 0) - 0.1) <= 1e-8);

  Eigen::VectorXd x(1), u(1);
  x << 1.0;
  u << 0.0;
  CHECK(std::abs(predict_one_step(model, x, u)(0) - 0.9) <= 1e-8);
  CHECK(one_step_rmse(model, s) <= 1e-6);
}

TEST_CASE("planar rotation eigenvalues") {
  const double theta = 0.1;
  const auto model = fit_checked(rotation_system(theta, 100), counts(2, 2));
  REQUIRE(model.eigenvalues.size() == 2);
  // conjugate pair ordered with the positive imaginary part first
  CHECK(std::abs(model.eigenvalues(0) - std::polar(1.0, theta)) <= 1e-8);
  CHECK(std::abs(model.eigenvalues(1) - std::polar(1.0, -theta)) <= 1e-8);

  SUBCASE("conjugate mode columns share magnitudes and negate phases") {
    const auto mag = mode_magnitude(model);
    CHECK(mag.col(0) == mag.col(1));
    const auto ph = mode_phase(model);
    for (Eigen::Index i = 0; i < ph.phase.rows(); ++i) {
      if (ph.masked(i, 0) || ph.masked(i, 1)) continue;
      CHECK(ph.phase(i, 0) == -ph.phase(i, 1));
    }
  }
}

TEST_CASE("exact recovery of a three-state system with one input") {
  std::mt19937_64 rng(17);
  // eigenvalues 0.95 e^{+-0.3 i} and 0.6, hidden behind a random similarity
  Eigen::Matrix3d block = Eigen::Matrix3d::Zero();
  block.topLeftCorner<2, 2>() = 0.95 * oracle::rotation(0.3);
  block(2, 2) = 0.6;
  const Eigen::MatrixXd t = oracle::random_gaussian(rng, 3, 3);
  const Eigen::MatrixXd a = t * block * t.inverse();
  const Eigen::MatrixXd b = oracle::random_gaussian(rng, 3, 1);
  const auto s = from_lti(oracle::simulate_lti(a, b, Eigen::Vector3d(1, -1, 0.5), oracle::random_gaussian(rng, 1, 500)));
  const auto model = fit_checked(s, counts(3, 4));
  CHECK(std::abs(model.eigenvalues(0) - std::polar(0.95, 0.3)) <= 1e-8);
  CHECK(std::abs(model.eigenvalues(1) - std::polar(0.95, -0.3)) <= 1e-8);
  CHECK(std::abs(model.eigenvalues(2) - 0.6) <= 1e-8);
}

TEST_CASE("oracle equivalence and mode property on random small systems") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = 1 + trial % 4;
    const Eigen::Index q = 1 + trial % 2;
    const Eigen::MatrixXd a = oracle::random_stable(rng, n, 0.9);
    const Eigen::MatrixXd b = oracle::random_gaussian(rng, n, q);
    const auto s = from_lti(oracle::simulate_lti(a, b, oracle::random_gaussian(rng, n, 1),
                                                 oracle::random_gaussian(rng, q, 60)));
    const auto model = fit_checked(s, counts(n, n + q));
    const Eigen::MatrixXd ab = oracle::least_squares_operator(s.x, s.u, s.x_next);
    const Eigen::MatrixXd a_full = ab.leftCols(n);
    const Eigen::MatrixXd b_full = ab.rightCols(q);
    const auto& uh = model.u_hat;
    CHECK((uh.transpose() * a_full * uh - model.a_tilde).norm() <= 1e-8);
    CHECK((uh.transpose() * b_full - model.b_tilde).norm() <= 1e-8);

    const Eigen::MatrixXcd lhs = (uh * uh.transpose() * a_full).cast<std::complex<double>>() * model.phi;
    const Eigen::MatrixXcd rhs = model.phi * model.eigenvalues.asDiagonal();
    CHECK((lhs - rhs).norm() <= 1e-6 * rhs.norm());
  }
}

TEST_CASE("eigenvalues are ordered and eigenvectors gauge-fixed") {
  std::mt19937_64 rng(41);
  const Eigen::MatrixXd a = oracle::random_stable(rng, 5, 0.97);
  const Eigen::MatrixXd b = oracle::random_gaussian(rng, 5, 1);
  const auto s = from_lti(oracle::simulate_lti(a, b, oracle::random_gaussian(rng, 5, 1),
                                               oracle::random_gaussian(rng, 1, 300)));
  const auto model = fit_checked(s, counts(5, 6));
  for (Eigen::Index j = 0; j + 1 < model.eigenvalues.size(); ++j) {
    const double m0 = std::abs(model.eigenvalues(j));
    const double m1 = std::abs(model.eigenvalues(j + 1));
    CHECK(m0 >= m1);
    if (m0 == m1) CHECK(model.eigenvalues(j).imag() >= model.eigenvalues(j + 1).imag());
  }
  for (Eigen::Index j = 0; j < model.eigenvectors.cols(); ++j) {
    const auto w = model.eigenvectors.col(j);
    CHECK(w.norm() == doctest::Approx(1.0).epsilon(1e-14));
    Eigen::Index first = 0;
    while (std::abs(w(first)) <= 1e-12) ++first;
    CHECK(w(first).imag() == 0.0);
    CHECK(w(first).real() > 0.0);
  }
  SUBCASE("refitting is deterministic") {
    const auto again = fit(uncentered(s), counts(5, 6));
    CHECK(again.phi == model.phi);
    CHECK(again.eigenvalues == model.eigenvalues);
  }
}

TEST_CASE("rank resolution") {
  Eigen::VectorXd sv(4);
  sv << 10.0, 1.0, 0.1, 0.0;
  CHECK(resolve_rank(RankSpec::count(3), sv) == 3);
  // energies 100, 1, 0.01, 0
  CHECK(resolve_rank(RankSpec::energy(0.99), sv) == 1);
  CHECK(resolve_rank(RankSpec::energy(0.9999), sv) == 2);
  CHECK(resolve_rank(RankSpec::energy(1.0), sv) == 3);  // capped at numerical rank
  CHECK(numerical_rank(sv) == 3);
  CHECK_THROWS_AS(resolve_rank(RankSpec::energy(0.0), sv), Error);
  CHECK_THROWS_AS(resolve_rank(RankSpec::energy(1.5), sv), Error);
  CHECK_THROWS_AS(resolve_rank(RankSpec{RankSpec::Kind::Count, 2.5}, sv), Error);
}

TEST_CASE("fit errors") {
  const auto s = scalar_system(50);
  SUBCASE("joint rank larger than snapshot count") {
    SnapshotSet<double> tiny = s;
    tiny.x = s.x.leftCols(1);
    tiny.x_next = s.x_next.leftCols(1);
    tiny.u = s.u.leftCols(1);
    CHECK_THROWS_AS(fit(tiny, counts(1, 2)), Error);
  }
  SUBCASE("r above p") { CHECK_THROWS_AS(fit(s, counts(2, 1)), Error); }
  SUBCASE("rank-deficient data") {
    SnapshotSet<double> dup;
    dup.x = Eigen::MatrixXd(2, 50);
    dup.x << s.x, s.x;  // second row duplicates the first
    dup.x_next = Eigen::MatrixXd(2, 50);
    dup.x_next << s.x_next, s.x_next;
    dup.u = s.u;
    try {
      fit(dup, counts(2, 3));
      FAIL("expected a rank-deficiency error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Numerical);
    }
    // energy ranks step around the deficiency
    const auto model = fit_checked(dup, DmdcConfig{});
    CHECK(model.rank_state() == 1);
  }
  SUBCASE("all-zero data") {
    SnapshotSet<double> z;
    z.x = Eigen::MatrixXd::Zero(2, 10);
    z.x_next = z.x;
    z.u = Eigen::MatrixXd::Zero(1, 10);
    CHECK_THROWS_AS(fit(z, DmdcConfig{}), Error);
  }
  SUBCASE("predict shape mismatch") {
    const auto model = fit(s, counts(1, 2));
    CHECK_THROWS_AS(predict_one_step(model, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(1)), Error);
    CHECK_THROWS_AS(predict_one_step(model, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(2)), Error);
  }
}

TEST_CASE("centered fit predicts in original units") {
  std::mt19937_64 rng(8);
  Eigen::MatrixXd a(2, 2), b(2, 1);
  a << 0.8, 0.1, -0.2, 0.7;
  b << 0.5, 0.2;
  const auto lti = oracle::simulate_lti(a, b, Eigen::Vector2d(0, 0), oracle::random_gaussian(rng, 1, 120));
  SnapshotSet<double> s;
  s.x = lti.x.colwise() + Eigen::Vector2d(3.6, 3.7);
  s.x_next = lti.x_next.colwise() + Eigen::Vector2d(3.6, 3.7);
  s.u = lti.u;
  const auto c = center_snapshots(s);
  const auto model = fit_checked(c, counts(2, 3));
  CHECK(model.offsets.state == c.offsets.state);

  double sq = 0;
  for (Eigen::Index k = 0; k < s.count(); ++k) {
    const Eigen::VectorXd expected =
        c.offsets.state + model.u_hat * (model.a_tilde * model.u_hat.transpose() * (s.x.col(k) - c.offsets.state) +
                                         model.b_tilde * (s.u.col(k) - c.offsets.input));
    const Eigen::VectorXd got = predict_one_step(model, Eigen::VectorXd(s.x.col(k)), Eigen::VectorXd(s.u.col(k)));
    CHECK((got - expected).norm() <= 1e-12);
    sq += (got - s.x_next.col(k)).squaredNorm();
  }
  CHECK(one_step_rmse(model, s) == doctest::Approx(std::sqrt(sq / double(s.x.size()))).epsilon(1e-12));
}

TEST_CASE("mode magnitude and phase arithmetic") {
  DmdcModel<double> model;
  model.phi.resize(2, 2);
  model.phi << std::complex<double>(3, 4), std::complex<double>(0, 1), std::complex<double>(-2, 0),
      std::complex<double>(1e-20, 0);
  const auto mag = mode_magnitude(model);
  CHECK(mag(0, 0) == 5.0);
  CHECK(mag(1, 0) == 2.0);
  const auto ph = mode_phase(model);
  CHECK(ph.phase(0, 1) == doctest::Approx(std::numbers::pi / 2).epsilon(1e-15));
  CHECK(ph.phase(1, 0) == doctest::Approx(std::numbers::pi).epsilon(1e-15));
  CHECK(ph.phase(1, 0) > 0.0);
  CHECK(ph.masked(1, 1));
  CHECK(ph.phase(1, 1) == 0.0);
  CHECK_FALSE(ph.masked(0, 0));

  SUBCASE("negative real with negative zero imaginary part maps to +pi") {
    model.phi(1, 0) = std::complex<double>(-2.0, -0.0);
    CHECK(mode_phase(model).phase(1, 0) == doctest::Approx(std::numbers::pi).epsilon(1e-15));
  }
  SUBCASE("real-valued modes give absolute values") {
    DmdcModel<double> real;
    real.phi = Eigen::MatrixXd::Constant(3, 2, -1.5).cast<std::complex<double>>();
    CHECK((mode_magnitude(real).array() == 1.5).all());
  }
}

TEST_CASE("fit works in single precision") {
  const auto sd = rotation_system(0.2, 80);
  SnapshotSet<float> s{sd.x.cast<float>(), sd.x_next.cast<float>(), sd.u.cast<float>()};
  const auto model = fit(s, counts(2, 2));
  CHECK(std::abs(model.eigenvalues(0) - std::polar(1.0f, 0.2f)) <= 1e-4f);
}
