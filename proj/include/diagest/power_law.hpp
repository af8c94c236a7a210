#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "diagest/probes.hpp"

namespace diagest {

/// Synthetic PSD test matrix family: eigenvalues lambda_i = i^(-c) with a
/// seeded random orthonormal eigenbasis. c controls the spectral decay, so
/// one knob sweeps from flat (c = 0, the identity) to sharply low-rank-like
/// spectra.
struct PowerLawSpectrumSpec {
  Eigen::Index n = 0;
  double c = 1.0;
  std::uint64_t seed = 0;
};

/// Eigendecomposition A = V diag(lambda) V^T with orthonormal V columns and
/// lambda sorted descending.
struct EigenFactorization {
  Eigen::MatrixXd V;
  Eigen::VectorXd lambda;
};

struct PowerLawPsd {
  Eigen::MatrixXd matrix;
  EigenFactorization eig;
};

/// Builds the dense matrix together with its factorization. The basis is the
/// Q factor of a seeded Gaussian matrix; the sign convention of its columns
/// is whatever the QR routine produces, which is irrelevant for A. Dense
/// materialization is refused beyond n = 5000.
inline PowerLawPsd generate_power_law_psd(const PowerLawSpectrumSpec& spec) {
  if (spec.n < 1) throw std::invalid_argument("generate_power_law_psd: n must be >= 1");
  if (spec.n > 5000)
    throw std::invalid_argument(
        "generate_power_law_psd: dense materialization refused beyond n = 5000");
  if (!(spec.c >= 0.0))
    throw std::invalid_argument("generate_power_law_psd: c must be >= 0");

  const Eigen::Index n = spec.n;
  // Keyed off a trial index no estimation substream uses, so sharing one
  // master seed between matrix generation and probing stays uncorrelated.
  detail::Xoshiro256pp gen(
      detail::probe_key(spec.seed, 0xFFFFFFFFFFFFFFFFULL, 0x9E3779B97F4A7C15ULL));
  Eigen::MatrixXd G(n, n);
  for (Eigen::Index j = 0; j < n; ++j) detail::fill_gaussian(gen, G.col(j));

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  PowerLawPsd out;
  out.eig.V = qr.householderQ();

  out.eig.lambda.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    out.eig.lambda[i] = std::pow(static_cast<double>(i + 1), -spec.c);

  out.matrix.noalias() =
      out.eig.V * out.eig.lambda.asDiagonal() * out.eig.V.transpose();
  // QR roundoff leaves ~1e-16 asymmetry; make symmetry exact.
  out.matrix = ((out.matrix + out.matrix.transpose()) / 2.0).eval();
  return out;
}

}  // namespace diagest
