#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "diagest/operators.hpp"
#include "diagest/power_law.hpp"

namespace diagest {

/// Accuracy/confidence pair: the estimator should land within eps (in the
/// sense of the chosen bound family) with probability at least 1 - delta.
struct EpsDelta {
  double eps;
  double delta;

  EpsDelta(double eps_, double delta_) : eps(eps_), delta(delta_) {
    if (!(eps > 0.0)) throw std::invalid_argument("EpsDelta: eps must be > 0");
    if (!(delta > 0.0) || !(delta < 1.0))
      throw std::invalid_argument("EpsDelta: delta must be in (0, 1)");
  }
};

/// Bound families implemented below.
enum class BoundKind {
  RowDependentElement,       // per-element, error scaled by the off-diagonal row norm
  RelativeElement,           // per-element relative error
  RowDependentFullDiagonal,  // all elements at once, row-norm scaling
  RelativeFullDiagonal,      // whole-diagonal relative error
  Kappa2,                    // relative, via the spectral condition number
  KappaDiag,                 // relative, via the diagonal condition number
  EigenvectorSigma,          // relative, via sigma_min of the squared eigenvector matrix
  DiagppRelative,            // projection + residual estimation, O(1/eps) regime
};

/// A sufficient query count. `s` is the smallest integer strictly exceeding
/// the closed-form bound `raw_bound` (never below 1). `valid` is false when
/// the requested accuracy lies outside the bound's hypotheses; in that case
/// `s` reports the count at the edge of validity and `validity_note` says why.
struct QueryBoundResult {
  std::int64_t s = 1;
  double raw_bound = 0.0;
  bool valid = true;
  std::string validity_note;
};

/// floor(raw) + 1: the bounds are strict inequalities, so a raw value that
/// happens to be an exact integer still rounds up.
inline std::int64_t sufficient_queries(double raw) {
  if (!(raw < 4.6e18))
    throw std::overflow_error("sufficient_queries: bound exceeds integer range");
  if (raw < 0.0) return 1;
  const std::int64_t s = static_cast<std::int64_t>(std::floor(raw)) + 1;
  return s < 1 ? 1 : s;
}

namespace detail {

// Rademacher bounds carry natural logs, Gaussian bounds carry base-2 logs;
// the bases are part of the statements and are never converted.
inline double rademacher_element_base(double delta) { return 2.0 * std::log(2.0 / delta); }
inline double gaussian_element_base(double delta) {
  return 4.0 * std::log2(std::numbers::sqrt2 / delta);
}
inline double rademacher_full_base(double delta, Eigen::Index n) {
  return 2.0 * std::log(2.0 * static_cast<double>(n) / delta);
}
inline double gaussian_full_base(double delta, Eigen::Index n) {
  return 4.0 * std::log2(static_cast<double>(n) * std::numbers::sqrt2 / delta);
}

/// Shared skeleton of the four probe-count bounds: `base(delta) * ratio /
/// eps^2`, where `ratio` rescales from row-norm error to the caller's error
/// metric. The Gaussian statements hold only while the row-norm-scaled
/// accuracy `eps / sqrt(ratio)` stays in (0, 1]; outside that range the
/// result is flagged and the edge-of-validity count (accuracy floor eps =
/// sqrt(ratio)) is reported instead.
inline QueryBoundResult scaled_bound(ProbeDistribution dist, const EpsDelta& ed,
                                     double base, double ratio) {
  QueryBoundResult out;
  if (ratio == 0.0) {
    out.raw_bound = 0.0;
    out.s = 1;
    out.validity_note = "off-diagonal mass is zero; a single probe is exact";
    return out;
  }
  const double eps_row = ed.eps / std::sqrt(ratio);
  if (dist == ProbeDistribution::Gaussian && eps_row > 1.0) {
    out.valid = false;
    out.raw_bound = base;  // bound evaluated at the eps = sqrt(ratio) validity edge
    out.s = sufficient_queries(out.raw_bound);
    out.validity_note = "gaussian bound requires row-scaled accuracy in (0,1]; requested eps " +
               std::to_string(ed.eps) + " exceeds the validity edge " +
               std::to_string(std::sqrt(ratio)) + "; s reported at that edge";
    return out;
  }
  out.raw_bound = base * ratio / (ed.eps * ed.eps);
  out.s = sufficient_queries(out.raw_bound);
  return out;
}

}  // namespace detail

/// Per-element bound: s probes suffice for |est_i - A_ii| <= eps * ||A_i
/// without its diagonal entry||_2 with probability >= 1 - delta. Holds for
/// any square matrix; no structure is assumed.
inline QueryBoundResult bound_row_dependent(ProbeDistribution dist, const EpsDelta& ed) {
  const double base = dist == ProbeDistribution::Rademacher
                          ? detail::rademacher_element_base(ed.delta)
                          : detail::gaussian_element_base(ed.delta);
  return detail::scaled_bound(dist, ed, base, 1.0);
}

/// Per-element relative bound; `row_ratio` is the off-diagonal row mass over
/// the squared diagonal entry, (||A_i||^2 - A_ii^2) / A_ii^2.
inline QueryBoundResult bound_relative_element(ProbeDistribution dist, const EpsDelta& ed,
                                               double row_ratio) {
  if (!(row_ratio >= 0.0))
    throw std::invalid_argument("bound_relative_element: row_ratio must be >= 0");
  const double base = dist == ProbeDistribution::Rademacher
                          ? detail::rademacher_element_base(ed.delta)
                          : detail::gaussian_element_base(ed.delta);
  return detail::scaled_bound(dist, ed, base, row_ratio);
}

/// Whole-diagonal bound via a union over the n elements. With relative set,
/// `full_ratio` = (||A||_F^2 - ||A_d||^2) / ||A_d||^2 must be supplied and
/// the result bounds ||est - A_d||_2 / ||A_d||_2 instead of the row-norm
/// scaled error.
inline QueryBoundResult bound_full_diagonal(ProbeDistribution dist, const EpsDelta& ed,
                                            Eigen::Index n, bool relative = false,
                                            std::optional<double> full_ratio = std::nullopt) {
  if (n < 1) throw std::invalid_argument("bound_full_diagonal: n must be >= 1");
  double ratio = 1.0;
  if (relative) {
    if (!full_ratio)
      throw std::invalid_argument(
          "bound_full_diagonal: relative form needs the off-diagonal/diagonal mass ratio");
    if (!(*full_ratio >= 0.0))
      throw std::invalid_argument("bound_full_diagonal: full_ratio must be >= 0");
    ratio = *full_ratio;
  }
  const double base = dist == ProbeDistribution::Rademacher
                          ? detail::rademacher_full_base(ed.delta, n)
                          : detail::gaussian_full_base(ed.delta, n);
  return detail::scaled_bound(dist, ed, base, ratio);
}

/// Relative whole-diagonal bound for PSD matrices driven by a condition
/// number: s > 2 (kappa - 1) ln(2n/delta) / eps^2, with Rademacher-style
/// constants. `kind` picks which condition number `kappa` is: Kappa2 for
/// lambda_1/lambda_n or KappaDiag for lambda_1 / (smallest nonzero diagonal
/// entry). kappa = 1 means the matrix is (a multiple of) the identity and a
/// single probe is exact.
inline QueryBoundResult bound_kappa(const EpsDelta& ed, Eigen::Index n, double kappa,
                                    BoundKind kind) {
  if (n < 1) throw std::invalid_argument("bound_kappa: n must be >= 1");
  if (!(kappa >= 1.0)) throw std::invalid_argument("bound_kappa: kappa must be >= 1");
  if (kind != BoundKind::Kappa2 && kind != BoundKind::KappaDiag)
    throw std::invalid_argument("bound_kappa: kind must be Kappa2 or KappaDiag");
  QueryBoundResult out;
  out.raw_bound =
      2.0 * (kappa - 1.0) * std::log(2.0 * static_cast<double>(n) / ed.delta) /
      (ed.eps * ed.eps);
  out.s = sufficient_queries(out.raw_bound);
  if (kappa == 1.0) out.validity_note = "kappa = 1: estimator variance vanishes, one probe is exact";
  return out;
}

/// Relative whole-diagonal bound for PSD A = V diag(lambda) V^T driven by the
/// eigenvector structure: s > 2 (1 - sigma_min^2(V.*V)) (||lambda||^2 /
/// ||A_d||^2) ln(2n/delta) / eps^2. sigma_min_vv = 1 (e.g. diagonal A) makes
/// a single probe exact.
inline QueryBoundResult bound_eigenvector(const EpsDelta& ed, Eigen::Index n,
                                          double sigma_min_vv, double lambda_norm_sq,
                                          double diag_norm_sq) {
  if (n < 1) throw std::invalid_argument("bound_eigenvector: n must be >= 1");
  if (!(sigma_min_vv >= 0.0) || !(sigma_min_vv <= 1.0))
    throw std::invalid_argument("bound_eigenvector: sigma_min_vv must be in [0, 1]");
  if (!(lambda_norm_sq >= 0.0) || !(diag_norm_sq > 0.0))
    throw std::invalid_argument("bound_eigenvector: norms must be positive");
  QueryBoundResult out;
  out.raw_bound = 2.0 * (1.0 - sigma_min_vv * sigma_min_vv) *
                  (lambda_norm_sq / diag_norm_sq) *
                  std::log(2.0 * static_cast<double>(n) / ed.delta) / (ed.eps * ed.eps);
  out.s = sufficient_queries(out.raw_bound);
  if (sigma_min_vv == 1.0)
    out.validity_note = "sigma_min(V.*V) = 1: diagonal-aligned eigenbasis, one probe is exact";
  return out;
}

/// Structure constants of a concrete matrix, i.e. everything the bound
/// calculators above want as input. Fields that need the eigendecomposition
/// are absent unless one is supplied; fields whose defining denominator is
/// zero are absent with a note.
struct MatrixConstants {
  Eigen::Index n = 0;
  double trace = 0.0;
  double frob_sq = 0.0;       // ||A||_F^2
  double diag_norm_sq = 0.0;  // ||A_d||_2^2
  /// Per-element (||A_i||^2 - A_ii^2) / A_ii^2; +inf when A_ii = 0 with a
  /// nonzero row, exactly 0 when the whole row is zero.
  Eigen::VectorXd row_ratios;
  std::optional<double> full_ratio;
  std::optional<double> trace_over_diag_norm;
  std::optional<double> kappa2;
  std::optional<double> kappa_d;
  std::optional<double> sigma_min_vv;
  std::optional<double> hadamard_residual;  // ||(V.*V) lambda - A_d|| / ||A_d||
  std::optional<Eigen::VectorXd> lambda;
  std::vector<std::string> notes;
};

namespace detail {

inline double ratio_from_row(double row_sq, double dii) {
  const double off = row_sq - dii * dii;
  if (dii == 0.0)
    return off <= 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::max(0.0, off) / (dii * dii);
}

inline void fill_shared_constants(MatrixConstants& out, const Eigen::VectorXd& diag,
                                  const Eigen::VectorXd& row_sq, double frob_sq) {
  out.n = diag.size();
  out.trace = diag.sum();
  out.frob_sq = frob_sq;
  out.diag_norm_sq = diag.squaredNorm();
  out.row_ratios.resize(diag.size());
  for (Eigen::Index i = 0; i < diag.size(); ++i)
    out.row_ratios[i] = ratio_from_row(row_sq[i], diag[i]);
  if (out.diag_norm_sq > 0.0) {
    out.full_ratio = std::max(0.0, frob_sq - out.diag_norm_sq) / out.diag_norm_sq;
    out.trace_over_diag_norm = out.trace / std::sqrt(out.diag_norm_sq);
  } else {
    out.notes.push_back("diagonal is identically zero; relative ratios undefined");
  }
}

}  // namespace detail

/// Constants from a dense matrix, optionally enriched with everything the
/// eigendecomposition gives access to. Computing sigma_min(V.*V) costs a
/// singular value decomposition of an n-by-n matrix, so supplying `eig` for
/// large n is a deliberate act.
inline MatrixConstants matrix_constants(const Eigen::Ref<const Eigen::MatrixXd>& M,
                                        const EigenFactorization* eig = nullptr) {
  require_square(M, "matrix_constants");
  MatrixConstants out;
  const Eigen::VectorXd diag = M.diagonal();
  Eigen::VectorXd row_sq(M.rows());
  for (Eigen::Index i = 0; i < M.rows(); ++i) row_sq[i] = M.row(i).squaredNorm();
  detail::fill_shared_constants(out, diag, row_sq, M.squaredNorm());

  if (eig != nullptr) {
    if (eig->V.rows() != M.rows() || eig->lambda.size() != M.rows())
      throw std::invalid_argument("matrix_constants: factorization size mismatch");
    out.lambda = eig->lambda;
    const double lambda_max = eig->lambda.maxCoeff();
    const double lambda_min = eig->lambda.minCoeff();
    if (lambda_min > 0.0)
      out.kappa2 = lambda_max / lambda_min;
    else
      out.notes.push_back("smallest eigenvalue is not positive; kappa2 undefined");

    double min_nonzero_diag = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < diag.size(); ++i)
      if (diag[i] != 0.0) min_nonzero_diag = std::min(min_nonzero_diag, std::abs(diag[i]));
    if (std::isfinite(min_nonzero_diag) && lambda_max > 0.0)
      out.kappa_d = lambda_max / min_nonzero_diag;
    else
      out.notes.push_back("no nonzero diagonal entries; kappa_d undefined");

    const Eigen::MatrixXd VV = eig->V.cwiseProduct(eig->V);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(VV);
    out.sigma_min_vv = svd.singularValues().minCoeff();

    if (out.diag_norm_sq > 0.0) {
      const Eigen::VectorXd reconstructed = VV * eig->lambda;
      out.hadamard_residual =
          (reconstructed - diag).norm() / std::sqrt(out.diag_norm_sq);
    }
  }
  return out;
}

/// Sparse variant: only the fields derivable without densifying (row ratios,
/// trace, Frobenius/diagonal masses). Meant for matrices too large to hold
/// densely.
inline MatrixConstants matrix_constants(const Eigen::SparseMatrix<double>& M) {
  if (M.rows() != M.cols())
    throw std::invalid_argument("matrix_constants: matrix must be square");
  MatrixConstants out;
  const Eigen::Index n = M.rows();
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd row_sq = Eigen::VectorXd::Zero(n);
  double frob_sq = 0.0;
  for (int k = 0; k < M.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(M, k); it; ++it) {
      row_sq[it.row()] += it.value() * it.value();
      frob_sq += it.value() * it.value();
      if (it.row() == it.col()) diag[it.row()] = it.value();
    }
  detail::fill_shared_constants(out, diag, row_sq, frob_sq);
  return out;
}

/// PSD row-norm bound ||A_i||_2^2 <= lambda_1 A_ii, checked with 1e-10
/// relative slack. A PSD matrix passes for lambda_1 = its largest
/// eigenvalue; indefinite matrices generically fail.
inline bool check_psd_row_bound(const Eigen::Ref<const Eigen::MatrixXd>& M,
                                double lambda1) {
  require_square(M, "check_psd_row_bound");
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    const double lhs = M.row(i).squaredNorm();
    if (lhs > lambda1 * M(i, i) + 1e-10 * std::max(1.0, lhs)) return false;
  }
  return true;
}

/// ||A - A_r||_F from the spectrum: the Frobenius norm of the tail past the
/// best rank-r approximation, sqrt(sum_{i > r} lambda_i^2) for descending
/// lambda. For PSD spectra this is at most trace / sqrt(r).
inline double spectrum_tail_frobenius(const Eigen::Ref<const Eigen::VectorXd>& lambda,
                                      Eigen::Index r) {
  if (r < 0) throw std::invalid_argument("spectrum_tail_frobenius: r must be >= 0");
  double tail = 0.0;
  for (Eigen::Index i = r; i < lambda.size(); ++i) tail += lambda[i] * lambda[i];
  return std::sqrt(tail);
}

}  // namespace diagest
