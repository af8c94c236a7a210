#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "diagest/matrix_market.hpp"
#include "diagest/operators.hpp"
#include "diagest/power_law.hpp"
#include "diagest/probes.hpp"

using namespace diagest;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

Eigen::MatrixXd random_symmetric(Eigen::Index n, std::uint64_t seed) {
  ProbeStream s(n * n, ProbeDistribution::Gaussian, seed);
  Eigen::VectorXd flat = s.next_probe();
  Eigen::MatrixXd M = Eigen::Map<Eigen::MatrixXd>(flat.data(), n, n);
  return ((M + M.transpose()) / 2.0).eval();
}

Eigen::MatrixXd random_orthonormal(Eigen::Index n, Eigen::Index k, std::uint64_t seed) {
  ProbeStream s(n, ProbeDistribution::Gaussian, seed);
  Eigen::MatrixXd G = probe_matrix(s, k);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("every apply is charged to the matvec ledger") {
  DenseOperator op(Eigen::MatrixXd::Identity(4, 4));
  CHECK(op.matvec_count() == 0);
  (void)op.apply(Eigen::VectorXd::Ones(4));
  (void)op.apply(Eigen::VectorXd::Zero(4));
  CHECK(op.matvec_count() == 2);
  op.reset_matvec_count();
  CHECK(op.matvec_count() == 0);
}

TEST_CASE("apply rejects wrong-sized input") {
  DenseOperator op(Eigen::MatrixXd::Identity(4, 4));
  CHECK_THROWS_AS((void)op.apply(Eigen::VectorXd::Ones(5)), std::invalid_argument);
}

TEST_CASE("dense operators detect symmetry and can insist on it") {
  Eigen::MatrixXd S = random_symmetric(6, 1);
  CHECK(DenseOperator(S).is_symmetric());

  Eigen::MatrixXd N = S;
  N(0, 1) += 1.0;
  CHECK_FALSE(DenseOperator(N).is_symmetric());
  CHECK_THROWS_AS(DenseOperator(N, true), std::invalid_argument);

  CHECK_THROWS_AS(DenseOperator(Eigen::MatrixXd::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("exact_diagonal reads the stored diagonal through n matvecs") {
  Eigen::MatrixXd M = random_symmetric(20, 2);
  DenseOperator op(M);
  const Eigen::VectorXd d = exact_diagonal(op);
  CHECK((d - M.diagonal()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(op.matvec_count() == 20);
}

TEST_CASE("diagonal and sparse operators agree with their dense forms") {
  Eigen::VectorXd d(3);
  d << 2.0, -1.0, 0.5;
  DiagonalOperator dop(d);
  CHECK(dop.is_symmetric());
  Eigen::VectorXd v(3);
  v << 1.0, 2.0, 4.0;
  CHECK((dop.apply(v) - d.cwiseProduct(v)).cwiseAbs().maxCoeff() == 0.0);

  Eigen::MatrixXd M = random_symmetric(12, 3);
  Eigen::SparseMatrix<double> S = M.sparseView();
  SparseOperator sop(S, true);
  DenseOperator dense(M);
  ProbeStream probes(12, ProbeDistribution::Gaussian, 4);
  const Eigen::VectorXd x = probes.next_probe();
  CHECK((sop.apply(x) - dense.apply(x)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("residual operator applies the deflated matrix with one oracle call") {
  const Eigen::Index n = 30;
  Eigen::MatrixXd A = random_symmetric(n, 5);
  Eigen::MatrixXd Q = random_orthonormal(n, 3, 6);
  const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n) - Q * Q.transpose();
  const Eigen::MatrixXd R = P * A * P;

  DenseOperator base(A);
  ResidualOperator plain(base, Q);
  ResidualOperator cached(base, Q, A * Q);

  ProbeStream probes(n, ProbeDistribution::Gaussian, 7);
  for (int k = 0; k < 3; ++k) {
    const Eigen::VectorXd v = probes.next_probe();
    const Eigen::VectorXd want = R * v;
    const std::int64_t before = base.matvec_count();
    const Eigen::VectorXd got_plain = plain.apply(v);
    CHECK(base.matvec_count() == before + 1);
    const Eigen::VectorXd got_cached = cached.apply(v);
    CHECK(base.matvec_count() == before + 2);
    CHECK((got_plain - want).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((got_cached - want).cwiseAbs().maxCoeff() < 1e-12);
  }

  const auto made_plain = make_residual_operator(base, Q);
  const auto made_cached = make_residual_operator(base, Q, A * Q);
  const Eigen::VectorXd v = probes.next_probe();
  CHECK((made_plain->apply(v) - R * v).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((made_cached->apply(v) - R * v).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(make_residual_operator(base, Q, Eigen::MatrixXd::Zero(n, 5)),
                  std::invalid_argument);
}

TEST_CASE("residual operator with an empty basis is the base operator") {
  Eigen::MatrixXd A = random_symmetric(8, 8);
  DenseOperator base(A);
  ResidualOperator r(base, Eigen::MatrixXd(8, 0));
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(8, 1.0, 8.0);
  CHECK((r.apply(v) - A * v).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("residual operator rejects a non-orthonormal basis") {
  Eigen::MatrixXd A = random_symmetric(6, 9);
  DenseOperator base(A);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Ones(6, 2);
  CHECK_THROWS_AS(ResidualOperator(base, Q), std::invalid_argument);
}

TEST_CASE("coordinate matrix market files load with symmetric mirroring") {
  const auto path = temp_file("diagest_coord.mtx");
  write_text(path,
             "%%MatrixMarket matrix coordinate real symmetric\n"
             "% comment line\n"
             "3 3 4\n"
             "1 1 2.0\n"
             "2 1 -1.0\n"
             "3 3 5.0\n"
             "3 2 0.25\n");
  const MatrixMarketData data = load_matrix_market(path.string());
  CHECK(data.symmetric);
  const Eigen::MatrixXd M = data.to_dense();
  Eigen::MatrixXd want(3, 3);
  want << 2.0, -1.0, 0.0, -1.0, 0.0, 0.25, 0.0, 0.25, 5.0;
  CHECK((M - want).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("written matrices read back identically") {
  Eigen::MatrixXd M = random_symmetric(7, 10);
  const auto sym_path = temp_file("diagest_sym.mtx");
  write_matrix_market(sym_path.string(), M, true);
  const MatrixMarketData sym = load_matrix_market(sym_path.string());
  CHECK(sym.symmetric);
  CHECK((sym.to_dense() - M).cwiseAbs().maxCoeff() == 0.0);

  Eigen::MatrixXd G = M;
  G(0, 1) += 3.0;  // no longer symmetric
  const auto gen_path = temp_file("diagest_gen.mtx");
  write_matrix_market(gen_path.string(), G);
  const MatrixMarketData gen = load_matrix_market(gen_path.string());
  CHECK_FALSE(gen.symmetric);
  CHECK((gen.to_dense() - G).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(write_matrix_market(temp_file("diagest_bad.mtx").string(), G, true),
                  std::invalid_argument);
}

TEST_CASE("malformed matrix market files are rejected with reasons") {
  const auto p1 = temp_file("diagest_mm_pattern.mtx");
  write_text(p1, "%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 1\n");
  CHECK_THROWS_WITH_AS(load_matrix_market(p1.string()),
                       doctest::Contains("real entries required"), std::runtime_error);

  const auto p2 = temp_file("diagest_mm_rect.mtx");
  write_text(p2, "%%MatrixMarket matrix coordinate real general\n2 3 1\n1 1 1.0\n");
  CHECK_THROWS_WITH_AS(load_matrix_market(p2.string()), doctest::Contains("square"),
                       std::runtime_error);

  const auto p3 = temp_file("diagest_mm_upper.mtx");
  write_text(p3, "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1.0\n");
  CHECK_THROWS_WITH_AS(load_matrix_market(p3.string()),
                       doctest::Contains("upper-triangle"), std::runtime_error);

  const auto p4 = temp_file("diagest_mm_short.mtx");
  write_text(p4, "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1.0\n");
  CHECK_THROWS_WITH_AS(load_matrix_market(p4.string()), doctest::Contains("file ends"),
                       std::runtime_error);

  const auto p5 = temp_file("diagest_mm_short_array.mtx");
  write_text(p5, "%%MatrixMarket matrix array real general\n2 2\n1.0\n2.0\n");
  CHECK_THROWS_WITH_AS(load_matrix_market(p5.string()), doctest::Contains("ends early"),
                       std::runtime_error);

  CHECK_THROWS_AS(load_matrix_market("/nonexistent/diagest.mtx"), std::runtime_error);
}

TEST_CASE("integer fields load as real values") {
  const auto path = temp_file("diagest_mm_int.mtx");
  write_text(path, "%%MatrixMarket matrix coordinate integer general\n2 2 2\n1 1 3\n2 2 -4\n");
  const Eigen::MatrixXd M = load_matrix_market(path.string()).to_dense();
  CHECK(M(0, 0) == 3.0);
  CHECK(M(1, 1) == -4.0);
}

TEST_CASE("power-law matrices match their returned factorization") {
  const PowerLawPsd psd = generate_power_law_psd({40, 1.0, 21});
  const auto& [V, lambda] = psd.eig;

  CHECK((V.transpose() * V - Eigen::MatrixXd::Identity(40, 40)).cwiseAbs().maxCoeff() <
        1e-12);
  for (Eigen::Index i = 0; i < 40; ++i)
    CHECK(lambda[i] == doctest::Approx(std::pow(double(i + 1), -1.0)).epsilon(1e-15));
  CHECK((V * lambda.asDiagonal() * V.transpose() - psd.matrix).cwiseAbs().maxCoeff() <
        1e-12);
  CHECK((psd.matrix - psd.matrix.transpose()).cwiseAbs().maxCoeff() == 0.0);

  const PowerLawPsd again = generate_power_law_psd({40, 1.0, 21});
  CHECK((again.matrix - psd.matrix).cwiseAbs().maxCoeff() == 0.0);
  const PowerLawPsd other = generate_power_law_psd({40, 1.0, 22});
  CHECK((other.matrix - psd.matrix).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("power-law generation validates its inputs") {
  CHECK_THROWS_AS(generate_power_law_psd({0, 1.0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(generate_power_law_psd({5001, 1.0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(generate_power_law_psd({10, -0.5, 0}), std::invalid_argument);
}

}  // TEST_SUITE
