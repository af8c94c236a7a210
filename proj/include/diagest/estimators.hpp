#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "diagest/operators.hpp"
#include "diagest/probes.hpp"

namespace diagest {

/// Result of a stochastic diagonal estimation run.
struct DiagonalEstimate {
  Eigen::VectorXd values;
  std::int64_t s = 0;
  ProbeDistribution dist = ProbeDistribution::Rademacher;
};

/// Streaming state of the quotient estimator
///
///   D_i = (sum_k v_k .* (A v_k))_i / (sum_k v_k .* v_k)_i .
///
/// Probes are absorbed one at a time so an estimate can be refined without
/// restarting; memory stays O(n) no matter how many probes pass through.
/// For Rademacher probes the denominator is exactly k after k probes, which
/// reduces the quotient to the plain sample mean.
class DiagonalAccumulator {
 public:
  DiagonalAccumulator(Eigen::Index n, ProbeDistribution dist)
      : dist_(dist),
        numerator_(Eigen::VectorXd::Zero(n)),
        denominator_(Eigen::VectorXd::Zero(n)) {
    if (n < 1) throw std::invalid_argument("DiagonalAccumulator: dimension must be >= 1");
  }

  Eigen::Index size() const { return numerator_.size(); }
  ProbeDistribution dist() const { return dist_; }
  std::int64_t probes() const { return probes_; }

  void absorb(const Eigen::Ref<const Eigen::VectorXd>& v,
              const Eigen::Ref<const Eigen::VectorXd>& Av) {
    if (v.size() != size() || Av.size() != size())
      throw std::invalid_argument("DiagonalAccumulator::absorb: size mismatch");
    numerator_.array() += v.array() * Av.array();
    denominator_.array() += v.array() * v.array();
    ++probes_;
    if (log_capacity_ > 0) {
      if (log_.size() < log_capacity_) {
        log_.emplace_back(v, Av);
      } else {
        log_[log_head_] = {v, Av};
        log_head_ = (log_head_ + 1) % log_capacity_;
      }
    }
  }

  /// Current estimate. Requires at least one absorbed probe. A denominator
  /// entry below 1e-300 means the probes degenerated on that coordinate
  /// (possible only for Gaussian draws, and vanishingly rare); the quotient
  /// is refused rather than returned as garbage.
  DiagonalEstimate extract() const {
    if (probes_ < 1)
      throw std::logic_error("DiagonalAccumulator::extract: no probes absorbed");
    for (Eigen::Index i = 0; i < denominator_.size(); ++i)
      if (denominator_[i] < 1e-300)
        throw std::runtime_error(
            "DiagonalAccumulator::extract: degenerate probe mass on coordinate " +
            std::to_string(i));
    DiagonalEstimate est;
    est.values = numerator_.array() / denominator_.array();
    est.s = probes_;
    est.dist = dist_;
    return est;
  }

  const Eigen::VectorXd& numerator() const { return numerator_; }
  const Eigen::VectorXd& denominator() const { return denominator_; }

  /// Optional probe log (off by default): keeps the most recent `capacity`
  /// (v, Av) pairs for consistency checks and debugging.
  void enable_log(std::size_t capacity) {
    log_capacity_ = capacity;
    log_.clear();
    log_head_ = 0;
    log_.reserve(capacity);
  }

  /// Logged pairs in absorption order, oldest first.
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> logged_probes() const {
    std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> out;
    out.reserve(log_.size());
    for (std::size_t k = 0; k < log_.size(); ++k)
      out.push_back(log_[(log_head_ + k) % log_.size()]);
    return out;
  }

 private:
  ProbeDistribution dist_;
  Eigen::VectorXd numerator_;
  Eigen::VectorXd denominator_;
  std::int64_t probes_ = 0;
  std::size_t log_capacity_ = 0;
  std::size_t log_head_ = 0;
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> log_;
};

/// Free-function spelling of DiagonalAccumulator::absorb.
inline void absorb_probe(DiagonalAccumulator& acc, const Eigen::Ref<const Eigen::VectorXd>& v,
                         const Eigen::Ref<const Eigen::VectorXd>& Av) {
  acc.absorb(v, Av);
}

/// Free-function spelling of DiagonalAccumulator::extract.
inline DiagonalEstimate extract_estimate(const DiagonalAccumulator& acc) {
  return acc.extract();
}

/// Runs the estimator for exactly s oracle matvecs. Equivalent to drawing s
/// probes from the stream and folding them through a DiagonalAccumulator.
inline DiagonalEstimate estimate_diagonal(const LinearOperator& op, std::int64_t s,
                                          ProbeDistribution dist, ProbeStream& stream) {
  if (s < 1) throw std::invalid_argument("estimate_diagonal: probe count must be >= 1");
  if (stream.size() != op.rows())
    throw std::invalid_argument("estimate_diagonal: stream/operator dimension mismatch");
  DiagonalAccumulator acc(op.rows(), dist);
  for (std::int64_t k = 0; k < s; ++k) {
    const Eigen::VectorXd v = stream.next_probe_as(dist);
    acc.absorb(v, op.apply(v));
  }
  return acc.extract();
}

/// The trace estimate that falls out of a Rademacher diagonal estimate for
/// free: summing the entries reproduces the classic quadratic-form average
/// (1/s) sum_k v_k^T A v_k on the same probes. Only exact for Rademacher
/// probes, where the denominator is deterministic; Gaussian input is refused.
inline double hutchinson_trace_from_estimate(const DiagonalEstimate& est) {
  if (est.dist == ProbeDistribution::Gaussian)
    throw std::invalid_argument(
        "hutchinson_trace_from_estimate: only Rademacher estimates sum to the "
        "quadratic-form trace average");
  if (est.s < 1)
    throw std::invalid_argument("hutchinson_trace_from_estimate: empty estimate");
  return est.values.sum();
}

/// Per-element variance of the s-probe estimator on a known matrix:
/// (||A_i||^2 - A_ii^2) / s for Rademacher, and the same numerator over
/// (s - 2) for Gaussian when s > 2. For s <= 2 the Gaussian estimator has
/// unbounded variance; those entries come back as +infinity.
inline Eigen::VectorXd reference_variances(const Eigen::Ref<const Eigen::MatrixXd>& M,
                                           ProbeDistribution dist, std::int64_t s) {
  require_square(M, "reference_variances");
  if (s < 1) throw std::invalid_argument("reference_variances: probe count must be >= 1");
  const Eigen::Index n = M.rows();
  Eigen::VectorXd offdiag_sq(n);
  for (Eigen::Index i = 0; i < n; ++i)
    offdiag_sq[i] = M.row(i).squaredNorm() - M(i, i) * M(i, i);

  if (dist == ProbeDistribution::Rademacher)
    return offdiag_sq / static_cast<double>(s);
  if (s <= 2)
    return Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  return offdiag_sq / static_cast<double>(s - 2);
}

}  // namespace diagest
