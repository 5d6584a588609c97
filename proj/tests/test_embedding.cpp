#include <doctest.h>

#include <limits>
#include <random>

#include "dmdgraph/embedding.hpp"
#include "oracles.hpp"

using namespace dmdgraph;

TEST_CASE("build_snapshots hand-built Hankel example") {
  Eigen::VectorXd v(4), i(4);
  v << 1, 2, 3, 4;
  i << 0, 0, 0, 0;
  const auto s = build_snapshots(v, i, 2);
  Eigen::MatrixXd x(2, 2), xn(2, 2);
  x << 1, 2, 2, 3;
  xn << 2, 3, 3, 4;
  CHECK(s.count() == 2);
  CHECK(s.x == x);
  CHECK(s.x_next == xn);
  CHECK(s.u == Eigen::MatrixXd::Zero(1, 2));
}

TEST_CASE("build_snapshots aligns input with the last sample of each window") {
  Eigen::VectorXd v(6), i(6);
  v << 10, 11, 12, 13, 14, 15;
  i << 0, 1, 2, 3, 4, 5;
  const auto s = build_snapshots(v, i, 3);
  REQUIRE(s.count() == 3);
  for (Eigen::Index k = 0; k < s.count(); ++k) CHECK(s.u(0, k) == i(k + 2));
}

TEST_CASE("build_snapshots degenerate embedding d = 1") {
  Eigen::VectorXd v(5), i = Eigen::VectorXd::Zero(5);
  v << 5, 4, 3, 2, 1;
  const auto s = build_snapshots(v, i, 1);
  CHECK(s.x.rows() == 1);
  CHECK(s.x.row(0).transpose() == v.head(4));
  CHECK(s.x_next.row(0).transpose() == v.tail(4));
}

TEST_CASE("build_snapshots constant series") {
  const Eigen::VectorXd v = Eigen::VectorXd::Constant(30, 3.7);
  const auto s = build_snapshots(v, Eigen::VectorXd::Zero(30), 5);
  CHECK((s.x.array() == 3.7).all());
  CHECK(s.x == s.x_next);
}

TEST_CASE("build_snapshots rejects short series with the required minimum") {
  const Eigen::VectorXd v = Eigen::VectorXd::Ones(5);
  try {
    build_snapshots(v, v, 5);
    FAIL("expected an insufficient-data error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
    CHECK(std::string(e.what()).find("at least 6") != std::string::npos);
  }
  CHECK_THROWS_AS(build_snapshots(v, v, 0), Error);
  CHECK_THROWS_AS(build_snapshots(v, Eigen::VectorXd::Ones(4), 2), Error);
}

TEST_CASE("shift structure and shape law hold for random series") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len_dist(2, 80);
  for (int trial = 0; trial < 50; ++trial) {
    const int length = len_dist(rng);
    std::uniform_int_distribution<int> d_dist(1, length - 1);
    const int d = d_dist(rng);
    const Eigen::VectorXd v = oracle::random_gaussian(rng, length, 1);
    const Eigen::VectorXd i = oracle::random_gaussian(rng, length, 1);
    const auto s = build_snapshots(v, i, d);
    CHECK(s.count() == length - d);
    CHECK(s.dim() == d);
    for (Eigen::Index j = 0; j + 1 < s.count(); ++j) CHECK(s.x_next.col(j) == s.x.col(j + 1));
  }
}

TEST_CASE("center_snapshots") {
  SUBCASE("zero-mean rows are unchanged") {
    SnapshotSet<double> s;
    s.x.resize(2, 2);
    s.x << 1, -1, -2, 2;
    s.x_next = s.x;
    s.u = Eigen::MatrixXd::Zero(1, 2);
    const auto c = center_snapshots(s);
    CHECK(c.snapshots.x == s.x);
    CHECK(c.offsets.state == Eigen::VectorXd::Zero(2));
    CHECK(c.offsets.input == Eigen::VectorXd::Zero(1));
  }
  SUBCASE("constant row") {
    SnapshotSet<double> s;
    s.x = Eigen::MatrixXd::Constant(1, 3, 3.0);
    s.x_next = s.x;
    s.u = Eigen::MatrixXd::Ones(1, 3);
    const auto c = center_snapshots(s);
    CHECK(c.snapshots.x == Eigen::MatrixXd::Zero(1, 3));
    CHECK(c.offsets.state(0) == 3.0);
  }
  SUBCASE("constant row whose floating-point mean is inexact") {
    SnapshotSet<double> s;
    s.x = Eigen::MatrixXd::Constant(1, 96, 3.7);
    s.x_next = s.x;
    s.u = Eigen::MatrixXd::Zero(1, 96);
    const auto c = center_snapshots(s);
    CHECK(c.offsets.state(0) == 3.7);
    CHECK((c.snapshots.x.array() == 0.0).all());
  }
  SUBCASE("random matrix rows end up zero-mean; x_next shares the x offsets") {
    std::mt19937_64 rng(5);
    SnapshotSet<double> s;
    s.x = oracle::random_gaussian(rng, 7, 40);
    s.x_next = oracle::random_gaussian(rng, 7, 40);
    s.u = oracle::random_gaussian(rng, 1, 40);
    const auto c = center_snapshots(s);
    for (Eigen::Index r = 0; r < 7; ++r) {
      double sum = 0;
      for (Eigen::Index k = 0; k < 40; ++k) sum += c.snapshots.x(r, k);
      CHECK(std::abs(sum / 40.0) < 1e-12);
      CHECK(c.snapshots.x_next(r, 0) == s.x_next(r, 0) - c.offsets.state(r));
    }
    double usum = 0;
    for (Eigen::Index k = 0; k < 40; ++k) usum += c.snapshots.u(0, k);
    CHECK(std::abs(usum / 40.0) < 1e-12);
  }
}

TEST_CASE("uncentering restores voltage-range states bit-exactly") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> volts(2.5, 4.2);
  std::uniform_real_distribution<double> amps(-30.0, 30.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd v(200), i(200);
    for (Eigen::Index k = 0; k < 200; ++k) {
      v(k) = volts(rng);
      i(k) = amps(rng) > 0 ? 30.0 : -30.0;
    }
    const auto s = build_snapshots(v, i, 12);
    const auto back = uncenter_snapshots(center_snapshots(s));
    CHECK(back.x == s.x);
    CHECK(back.x_next == s.x_next);
    // +-30 A inputs sit far from their mean, so only an ulp-level bound holds
    CHECK((back.u - s.u).cwiseAbs().maxCoeff() <= 30.0 * std::numeric_limits<double>::epsilon());
  }
}

TEST_CASE("TimeSeries overload uses voltage as state and current as input") {
  sim::TimeSeries ts;
  for (int k = 0; k < 10; ++k) ts.samples.push_back({double(k), double(k % 3), 3.0 + 0.1 * k});
  const auto s = build_snapshots(ts, 4);
  CHECK(s.count() == 6);
  CHECK(s.x(0, 0) == 3.0);
  CHECK(s.u(0, 0) == 0.0);  // current at sample 3
  CHECK(s.u(0, 1) == 1.0);
}

TEST_CASE("build_snapshots is templated on the scalar") {
  Eigen::VectorXf v = Eigen::VectorXf::LinSpaced(10, 0.0f, 1.0f);
  const auto s = build_snapshots(v, Eigen::VectorXf::Zero(10), 3);
  static_assert(std::is_same_v<decltype(s.x)::Scalar, float>);
  CHECK(s.count() == 7);
}
