#pragma once

// Exhaustive enumeration of the sign-probe diagonal estimator.  Every one of
// the 2^(n*s) probe sign patterns is equally likely, so averaging the
// estimator over all of them gives its exact mean, variance and covariance.
// Exponential cost; keep n * s at 24 bits or fewer.

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>

namespace diagest::testing {

struct EnumeratedMoments {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  Eigen::MatrixXd covariance;
};

inline EnumeratedMoments enumerate_sign_probe_moments(const Eigen::MatrixXd& A,
                                                      int probes) {
  if (A.rows() != A.cols()) throw std::invalid_argument("square matrix required");
  if (probes < 1) throw std::invalid_argument("at least one probe");
  const int n = static_cast<int>(A.rows());
  const int bits = n * probes;
  if (bits > 24) throw std::invalid_argument("pattern space too large to enumerate");

  const std::uint64_t count = std::uint64_t{1} << bits;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd v(n), estimate(n);
  for (std::uint64_t pattern = 0; pattern < count; ++pattern) {
    estimate.setZero();
    for (int k = 0; k < probes; ++k) {
      for (int i = 0; i < n; ++i)
        v[i] = ((pattern >> (k * n + i)) & 1u) ? 1.0 : -1.0;
      estimate += v.cwiseProduct(A * v);
    }
    estimate /= static_cast<double>(probes);
    sum += estimate;
    outer += estimate * estimate.transpose();
  }

  EnumeratedMoments m;
  m.mean = sum / static_cast<double>(count);
  m.covariance = outer / static_cast<double>(count) - m.mean * m.mean.transpose();
  m.variance = m.covariance.diagonal();
  return m;
}

}  // namespace diagest::testing
