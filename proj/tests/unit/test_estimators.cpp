#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "diagest/estimators.hpp"
#include "diagest/operators.hpp"
#include "diagest/power_law.hpp"
#include "diagest/probes.hpp"
#include "support/enumeration.hpp"

using namespace diagest;
using diagest::testing::enumerate_sign_probe_moments;

namespace {

// Dyadic entries so every enumeration average is exact in binary arithmetic.
Eigen::MatrixXd dyadic4() {
  Eigen::MatrixXd A(4, 4);
  A << 4.0, 1.0, 0.5, 0.25,
       1.0, 3.0, 0.125, 0.0625,
       0.5, 0.125, 2.0, 0.03125,
       0.25, 0.0625, 0.03125, 1.0;
  return A;
}

Eigen::MatrixXd dyadic6() {
  Eigen::MatrixXd A(6, 6);
  A << 2.0,  0.5,   0.0,  0.25, 0.0,   1.0,
       0.5,  3.0,   0.5,  0.0,  0.125, 0.0,
       0.0,  0.5,   1.0,  0.75, 0.0,   0.5,
       0.25, 0.0,   0.75, 4.0,  0.5,   0.0,
       0.0,  0.125, 0.0,  0.5,  5.0,   0.25,
       1.0,  0.0,   0.5,  0.0,  0.25,  6.0;
  return A;
}

}  // namespace

TEST_SUITE("estimators") {

TEST_CASE("one absorbed probe reproduces the quotient formula") {
  Eigen::MatrixXd A = dyadic4();
  ProbeStream s(4, ProbeDistribution::Gaussian, 17);
  const Eigen::VectorXd v = s.next_probe();
  const Eigen::VectorXd Av = A * v;

  DiagonalAccumulator acc(4, ProbeDistribution::Gaussian);
  acc.absorb(v, Av);
  const DiagonalEstimate est = acc.extract();
  const Eigen::VectorXd want = (v.array() * Av.array() / (v.array() * v.array())).matrix();
  CHECK((est.values - want).cwiseAbs().maxCoeff() == 0.0);
  CHECK(est.s == 1);
}

TEST_CASE("enumerated mean of the sign-probe estimator is the diagonal") {
  const Eigen::MatrixXd A = dyadic4();
  for (int s : {1, 2}) {
    const auto m = enumerate_sign_probe_moments(A, s);
    CHECK((m.mean - A.diagonal()).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("enumerated variance matches the closed form") {
  const Eigen::MatrixXd A = dyadic4();
  for (int s : {1, 2}) {
    const auto m = enumerate_sign_probe_moments(A, s);
    const Eigen::VectorXd want = reference_variances(A, ProbeDistribution::Rademacher, s);
    CHECK((m.variance - want).cwiseAbs().maxCoeff() <= 1e-12);
  }
  // Independently derived value for the first coordinate at one probe:
  // 1^2 + 0.5^2 + 0.25^2 = 1.3125.
  const auto m1 = enumerate_sign_probe_moments(A, 1);
  CHECK(m1.variance[0] == doctest::Approx(1.3125).epsilon(1e-14));
}

TEST_CASE("enumerated covariance across elements is the squared entry") {
  const Eigen::MatrixXd A = dyadic6();
  const auto m = enumerate_sign_probe_moments(A, 1);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      if (i == j) continue;
      CHECK(m.covariance(i, j) == doctest::Approx(A(i, j) * A(i, j)).epsilon(1e-12));
    }
}

TEST_CASE("closed-form variances on a fixed matrix") {
  Eigen::MatrixXd A(2, 2);
  A << 1.0, 2.0, 2.0, 5.0;
  const Eigen::VectorXd r1 = reference_variances(A, ProbeDistribution::Rademacher, 1);
  CHECK(r1[0] == 4.0);
  CHECK(r1[1] == 4.0);
  const Eigen::VectorXd r4 = reference_variances(A, ProbeDistribution::Rademacher, 4);
  CHECK(r4[0] == 1.0);
  CHECK(r4[1] == 1.0);
  const Eigen::VectorXd g6 = reference_variances(A, ProbeDistribution::Gaussian, 6);
  CHECK(g6[0] == 1.0);
  CHECK(g6[1] == 1.0);
  const Eigen::VectorXd g2 = reference_variances(A, ProbeDistribution::Gaussian, 2);
  CHECK(g2[0] == std::numeric_limits<double>::infinity());
  const Eigen::VectorXd g1 = reference_variances(A, ProbeDistribution::Gaussian, 1);
  CHECK(g1[1] == std::numeric_limits<double>::infinity());
}

TEST_CASE("matrices without off-diagonal mass are estimated exactly") {
  Eigen::VectorXd d(5);
  d << 3.0, -2.0, 0.5, 7.0, 1.0;
  DiagonalOperator op(d);
  for (auto dist : {ProbeDistribution::Rademacher, ProbeDistribution::Gaussian}) {
    ProbeStream stream(5, dist, 23);
    const DiagonalEstimate est = estimate_diagonal(op, 3, dist, stream);
    CHECK((est.values - d).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("estimate_diagonal equals a manual accumulator fold") {
  const PowerLawPsd psd = generate_power_law_psd({20, 1.0, 5});
  DenseOperator op(psd.matrix);
  ProbeStream s1(20, ProbeDistribution::Gaussian, 9, 4);
  ProbeStream s2(20, ProbeDistribution::Gaussian, 9, 4);

  const DiagonalEstimate direct = estimate_diagonal(op, 6, ProbeDistribution::Gaussian, s1);
  DiagonalAccumulator acc(20, ProbeDistribution::Gaussian);
  for (int k = 0; k < 6; ++k) {
    const Eigen::VectorXd v = s2.next_probe();
    absorb_probe(acc, v, psd.matrix * v);
  }
  const DiagonalEstimate folded = extract_estimate(acc);
  CHECK(folded.s == 6);
  CHECK((direct.values - folded.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("error contracts like one over the square root of the probe count") {
  const PowerLawPsd psd = generate_power_law_psd({200, 1.0, 31});
  DenseOperator op(psd.matrix);
  const Eigen::VectorXd truth = psd.matrix.diagonal();

  auto median_error = [&](std::int64_t s, std::uint64_t trial_base) {
    std::vector<double> errs;
    for (int t = 0; t < 40; ++t) {
      ProbeStream stream(200, ProbeDistribution::Rademacher, 77, trial_base + t);
      const DiagonalEstimate est =
          estimate_diagonal(op, s, ProbeDistribution::Rademacher, stream);
      errs.push_back((est.values - truth).norm());
    }
    std::sort(errs.begin(), errs.end());
    return errs[errs.size() / 2];
  };

  const double e8 = median_error(8, 0);
  const double e32 = median_error(32, 1000);
  CHECK(e8 / e32 > 1.6);   // quadrupling probes should halve the error,
  CHECK(e8 / e32 < 2.6);   // up to sampling noise in the medians
}

TEST_CASE("summing a sign-probe estimate gives the quadratic-form trace average") {
  const PowerLawPsd psd = generate_power_law_psd({30, 0.5, 13});
  DenseOperator op(psd.matrix);
  DiagonalAccumulator acc(30, ProbeDistribution::Rademacher);
  acc.enable_log(8);
  ProbeStream stream(30, ProbeDistribution::Rademacher, 3);
  for (int k = 0; k < 5; ++k) {
    const Eigen::VectorXd v = stream.next_probe();
    acc.absorb(v, op.apply(v));
  }
  const double trace_est = hutchinson_trace_from_estimate(acc.extract());

  double quad = 0.0;
  const auto logged = acc.logged_probes();
  REQUIRE(logged.size() == 5);
  for (const auto& [v, Av] : logged) quad += v.dot(Av);
  quad /= 5.0;
  CHECK(trace_est == doctest::Approx(quad).epsilon(1e-12));

  DiagonalEstimate gaussian;
  gaussian.values = Eigen::VectorXd::Ones(3);
  gaussian.s = 2;
  gaussian.dist = ProbeDistribution::Gaussian;
  CHECK_THROWS_AS((void)hutchinson_trace_from_estimate(gaussian), std::invalid_argument);
}

TEST_CASE("the probe log keeps the most recent pairs in order") {
  DiagonalAccumulator acc(2, ProbeDistribution::Rademacher);
  acc.enable_log(2);
  Eigen::VectorXd a(2), b(2), c(2);
  a << 1.0, 1.0;
  b << 1.0, -1.0;
  c << -1.0, 1.0;
  acc.absorb(a, a);
  acc.absorb(b, b);
  acc.absorb(c, c);
  const auto logged = acc.logged_probes();
  REQUIRE(logged.size() == 2);
  CHECK(logged[0].first == b);
  CHECK(logged[1].first == c);
}

TEST_CASE("degenerate probe mass is refused instead of divided by") {
  DiagonalAccumulator acc(3, ProbeDistribution::Gaussian);
  acc.absorb(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3));
  CHECK_THROWS_AS((void)acc.extract(), std::runtime_error);
}

TEST_CASE("estimator inputs are validated") {
  DenseOperator op(Eigen::MatrixXd::Identity(4, 4));
  ProbeStream stream(4, ProbeDistribution::Rademacher, 1);
  CHECK_THROWS_AS((void)estimate_diagonal(op, 0, ProbeDistribution::Rademacher, stream),
                  std::invalid_argument);
  ProbeStream wrong(5, ProbeDistribution::Rademacher, 1);
  CHECK_THROWS_AS((void)estimate_diagonal(op, 1, ProbeDistribution::Rademacher, wrong),
                  std::invalid_argument);
  DiagonalAccumulator acc(4, ProbeDistribution::Rademacher);
  CHECK_THROWS_AS((void)acc.extract(), std::logic_error);
  CHECK_THROWS_AS(DiagonalAccumulator(0, ProbeDistribution::Rademacher),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)reference_variances(Eigen::MatrixXd::Zero(2, 3),
                                            ProbeDistribution::Rademacher, 1),
                  std::invalid_argument);
}

}  // TEST_SUITE
