#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

namespace diagest {

using Eigen::Index;

/// Matrix access contract for every estimator in this library: the matrix is
/// visible only through y = A*x. Each apply() bumps an atomic counter, so the
/// exact number of oracle calls spent by any algorithm can be read back.
/// Implementations are immutable after construction; concurrent apply() calls
/// from several threads are safe.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  Index rows() const { return n_; }

  /// Whether the represented matrix is (declared) symmetric.
  bool is_symmetric() const { return symmetric_; }

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& v) const {
    if (v.size() != n_)
      throw std::invalid_argument("LinearOperator::apply: expected vector of size " +
                                  std::to_string(n_) + ", got " + std::to_string(v.size()));
    count_.fetch_add(1, std::memory_order_relaxed);
    Eigen::VectorXd out(n_);
    do_apply(v, out);
    return out;
  }

  /// Total apply() calls since construction (or the last reset).
  std::int64_t matvec_count() const { return count_.load(std::memory_order_relaxed); }
  void reset_matvec_count() const { count_.store(0, std::memory_order_relaxed); }

 protected:
  LinearOperator(Index n, bool symmetric) : n_(n), symmetric_(symmetric) {
    if (n < 1) throw std::invalid_argument("LinearOperator: dimension must be >= 1");
  }

  virtual void do_apply(const Eigen::Ref<const Eigen::VectorXd>& v,
                        Eigen::Ref<Eigen::VectorXd> out) const = 0;

 private:
  Index n_;
  bool symmetric_;
  mutable std::atomic<std::int64_t> count_{0};
};

/// Max-norm asymmetry check used wherever a square matrix is promised to be
/// symmetric. Tolerance is relative to the largest entry magnitude.
inline bool is_symmetric_within(const Eigen::Ref<const Eigen::MatrixXd>& M,
                                double rel_tol = 1e-12) {
  if (M.rows() != M.cols()) return false;
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

inline void require_square(const Eigen::Ref<const Eigen::MatrixXd>& M, const char* who) {
  if (M.rows() != M.cols())
    throw std::invalid_argument(std::string(who) + ": matrix must be square, got " +
                                std::to_string(M.rows()) + "x" + std::to_string(M.cols()));
}

class DenseOperator final : public LinearOperator {
 public:
  /// When require_symmetric is set the entries are checked, not trusted.
  explicit DenseOperator(Eigen::MatrixXd M, bool require_symmetric = false)
      : LinearOperator(M.rows(), require_symmetric || is_symmetric_within(M)),
        M_(std::move(M)) {
    require_square(M_, "DenseOperator");
    if (require_symmetric && !is_symmetric_within(M_))
      throw std::invalid_argument("DenseOperator: matrix is not symmetric within tolerance");
  }

  const Eigen::MatrixXd& matrix() const { return M_; }

 protected:
  void do_apply(const Eigen::Ref<const Eigen::VectorXd>& v,
                Eigen::Ref<Eigen::VectorXd> out) const override {
    out.noalias() = M_ * v;
  }

 private:
  Eigen::MatrixXd M_;
};

class SparseOperator final : public LinearOperator {
 public:
  explicit SparseOperator(Eigen::SparseMatrix<double> M, bool symmetric = false)
      : LinearOperator(M.rows(), symmetric), M_(std::move(M)) {
    if (M_.rows() != M_.cols())
      throw std::invalid_argument("SparseOperator: matrix must be square");
  }

  const Eigen::SparseMatrix<double>& matrix() const { return M_; }

 protected:
  void do_apply(const Eigen::Ref<const Eigen::VectorXd>& v,
                Eigen::Ref<Eigen::VectorXd> out) const override {
    out.noalias() = M_ * v;
  }

 private:
  Eigen::SparseMatrix<double> M_;
};

class DiagonalOperator final : public LinearOperator {
 public:
  explicit DiagonalOperator(Eigen::VectorXd d)
      : LinearOperator(d.size(), true), d_(std::move(d)) {}

  const Eigen::VectorXd& diagonal() const { return d_; }

 protected:
  void do_apply(const Eigen::Ref<const Eigen::VectorXd>& v,
                Eigen::Ref<Eigen::VectorXd> out) const override {
    out.array() = d_.array() * v.array();
  }

 private:
  Eigen::VectorXd d_;
};

/// (I - QQ^T) A (I - QQ^T) for an orthonormal Q, charging exactly one matvec
/// of the base oracle per apply. When the product AQ is already known (the
/// range-projection step computes it anyway) pass it in; the deflated matvec
/// then reuses it as A(I-QQ^T)v = Av - (AQ)(Q^T v). Without the cache the
/// probe is projected first and A is applied to the projection. Either way
/// the base oracle is consulted once.
///
/// The base operator must outlive this wrapper.
class ResidualOperator final : public LinearOperator {
 public:
  ResidualOperator(const LinearOperator& base, Eigen::MatrixXd Q)
      : LinearOperator(base.rows(), base.is_symmetric()), base_(base), Q_(std::move(Q)) {
    check_basis();
  }

  ResidualOperator(const LinearOperator& base, Eigen::MatrixXd Q, Eigen::MatrixXd AQ)
      : LinearOperator(base.rows(), base.is_symmetric()),
        base_(base),
        Q_(std::move(Q)),
        AQ_(std::move(AQ)),
        has_cache_(true) {
    check_basis();
    if (AQ_.rows() != Q_.rows() || AQ_.cols() != Q_.cols())
      throw std::invalid_argument("ResidualOperator: AQ shape must match Q");
  }

  Index basis_size() const { return Q_.cols(); }

 protected:
  void do_apply(const Eigen::Ref<const Eigen::VectorXd>& v,
                Eigen::Ref<Eigen::VectorXd> out) const override {
    if (Q_.cols() == 0) {
      out = base_.apply(v);
      return;
    }
    Eigen::VectorXd y;
    if (has_cache_) {
      y = base_.apply(v);
      y.noalias() -= AQ_ * (Q_.transpose() * v);
    } else {
      Eigen::VectorXd w = v - Q_ * (Q_.transpose() * v);
      y = base_.apply(w);
    }
    out = y - Q_ * (Q_.transpose() * y);
  }

 private:
  void check_basis() {
    if (Q_.rows() != base_.rows())
      throw std::invalid_argument("ResidualOperator: Q row count must match operator size");
    if (Q_.cols() > 0) {
      const Eigen::MatrixXd gram = Q_.transpose() * Q_;
      const double defect =
          (gram - Eigen::MatrixXd::Identity(Q_.cols(), Q_.cols())).cwiseAbs().maxCoeff();
      if (defect > 1e-10)
        throw std::invalid_argument(
            "ResidualOperator: Q is not orthonormal (max |Q^T Q - I| = " +
            std::to_string(defect) + ")");
    }
  }

  const LinearOperator& base_;
  Eigen::MatrixXd Q_;
  Eigen::MatrixXd AQ_;
  bool has_cache_ = false;
};

inline std::unique_ptr<LinearOperator> make_dense_operator(Eigen::MatrixXd M,
                                                           bool require_symmetric = false) {
  return std::make_unique<DenseOperator>(std::move(M), require_symmetric);
}

/// Deflated view (I - QQ^T) A (I - QQ^T) of `base`, optionally reusing a
/// precomputed AQ product. The referenced base must outlive the result.
inline std::unique_ptr<ResidualOperator> make_residual_operator(
    const LinearOperator& base, Eigen::MatrixXd Q,
    std::optional<Eigen::MatrixXd> AQ = std::nullopt) {
  if (AQ) return std::make_unique<ResidualOperator>(base, std::move(Q), std::move(*AQ));
  return std::make_unique<ResidualOperator>(base, std::move(Q));
}

/// True diagonal of an arbitrary operator via n canonical-basis matvecs.
/// Inherently n oracle calls; meant for ground truth, not estimation.
inline Eigen::VectorXd exact_diagonal(const LinearOperator& op) {
  const Index n = op.rows();
  Eigen::VectorXd d(n);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i) {
    e[i] = 1.0;
    d[i] = op.apply(e)[i];
    e[i] = 0.0;
  }
  return d;
}

}  // namespace diagest
