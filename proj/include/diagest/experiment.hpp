#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "diagest/bounds.hpp"
#include "diagest/diagpp.hpp"
#include "diagest/estimators.hpp"
#include "diagest/format.hpp"
#include "diagest/matrix_market.hpp"
#include "diagest/operators.hpp"
#include "diagest/power_law.hpp"
#include "diagest/probes.hpp"

namespace diagest {

/// Seed used whenever the caller does not pick one. Fixed so that default
/// runs of the tools reproduce byte-identically.
inline constexpr std::uint64_t kDefaultMasterSeed = 42;

enum class EstimatorKind { Rademacher, Gaussian, Diagpp, ProjectionOnly };

inline const char* to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Rademacher: return "rademacher";
    case EstimatorKind::Gaussian: return "gaussian";
    case EstimatorKind::Diagpp: return "diagpp";
    case EstimatorKind::ProjectionOnly: return "projection-only";
  }
  return "?";
}

/// Where the test matrix comes from. Parsed from a command-line string:
///   powerlaw:N,C   synthetic power-law PSD matrix (spectrum i^-C)
///   identity:N     the identity
///   *.mtx          Matrix Market file
///   anything else  whitespace-separated dense entries, n rows of n values
struct MatrixSource {
  enum class Kind { PowerLaw, Identity, MatrixMarket, DenseFile };
  Kind kind = Kind::PowerLaw;
  Eigen::Index n = 0;        // PowerLaw / Identity
  double c = 1.0;            // PowerLaw
  std::uint64_t seed = kDefaultMasterSeed;  // PowerLaw basis seed
  std::string path;          // files
};

inline MatrixSource parse_matrix_source(const std::string& text,
                                        std::uint64_t generator_seed = kDefaultMasterSeed) {
  MatrixSource src;
  src.seed = generator_seed;
  if (text.rfind("powerlaw:", 0) == 0) {
    src.kind = MatrixSource::Kind::PowerLaw;
    const std::string args = text.substr(9);
    const auto comma = args.find(',');
    if (comma == std::string::npos)
      throw std::invalid_argument("matrix source '" + text + "': expected powerlaw:N,C");
    try {
      src.n = std::stol(args.substr(0, comma));
      src.c = std::stod(args.substr(comma + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument("matrix source '" + text + "': expected powerlaw:N,C");
    }
    return src;
  }
  if (text.rfind("identity:", 0) == 0) {
    src.kind = MatrixSource::Kind::Identity;
    try {
      src.n = std::stol(text.substr(9));
    } catch (const std::exception&) {
      throw std::invalid_argument("matrix source '" + text + "': expected identity:N");
    }
    if (src.n < 1)
      throw std::invalid_argument("matrix source '" + text + "': size must be >= 1");
    return src;
  }
  src.path = text;
  src.kind = text.size() >= 4 && text.substr(text.size() - 4) == ".mtx"
                 ? MatrixSource::Kind::MatrixMarket
                 : MatrixSource::Kind::DenseFile;
  return src;
}

/// A matrix instantiated for experiments: the oracle plus the exact answers
/// and structure constants the harness grades against. The ground truth
/// comes straight from storage, not from oracle calls, so it never touches
/// the matvec ledger.
struct Problem {
  std::unique_ptr<LinearOperator> op;
  Eigen::VectorXd diagonal;
  Eigen::VectorXd row_norms_sq;
  double frob_sq = 0.0;
  std::optional<EigenFactorization> eig;  // present for power-law sources
  Eigen::Index n = 0;
};

inline Eigen::MatrixXd load_dense_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dense matrix file '" + path + "': cannot open");
  std::vector<double> vals;
  double v;
  while (in >> v) vals.push_back(v);
  if (!in.eof())
    throw std::runtime_error("dense matrix file '" + path + "': non-numeric content");
  const auto count = vals.size();
  const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(double(count))));
  if (count == 0 || static_cast<std::size_t>(n) * static_cast<std::size_t>(n) != count)
    throw std::runtime_error("dense matrix file '" + path + "': expected n*n entries, got " +
                             std::to_string(count));
  Eigen::MatrixXd M(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) M(i, j) = vals[static_cast<std::size_t>(i * n + j)];
  return M;
}

inline Problem build_problem(const MatrixSource& src) {
  Problem p;
  switch (src.kind) {
    case MatrixSource::Kind::PowerLaw: {
      PowerLawPsd psd = generate_power_law_psd({src.n, src.c, src.seed});
      p.n = src.n;
      p.diagonal = psd.matrix.diagonal();
      p.frob_sq = psd.matrix.squaredNorm();
      p.row_norms_sq.resize(p.n);
      for (Eigen::Index i = 0; i < p.n; ++i)
        p.row_norms_sq[i] = psd.matrix.row(i).squaredNorm();
      p.eig = std::move(psd.eig);
      p.op = std::make_unique<DenseOperator>(std::move(psd.matrix), true);
      return p;
    }
    case MatrixSource::Kind::Identity: {
      p.n = src.n;
      p.diagonal = Eigen::VectorXd::Ones(src.n);
      p.frob_sq = static_cast<double>(src.n);
      p.row_norms_sq = Eigen::VectorXd::Ones(src.n);
      p.op = std::make_unique<DiagonalOperator>(Eigen::VectorXd::Ones(src.n));
      return p;
    }
    case MatrixSource::Kind::MatrixMarket: {
      MatrixMarketData data = load_matrix_market(src.path);
      const auto& M = data.matrix;
      p.n = M.rows();
      p.diagonal = Eigen::VectorXd::Zero(p.n);
      p.row_norms_sq = Eigen::VectorXd::Zero(p.n);
      p.frob_sq = 0.0;
      for (int k = 0; k < M.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(M, k); it; ++it) {
          p.row_norms_sq[it.row()] += it.value() * it.value();
          p.frob_sq += it.value() * it.value();
          if (it.row() == it.col()) p.diagonal[it.row()] = it.value();
        }
      p.op = std::make_unique<SparseOperator>(std::move(data.matrix), data.symmetric);
      return p;
    }
    case MatrixSource::Kind::DenseFile: {
      Eigen::MatrixXd M = load_dense_table(src.path);
      p.n = M.rows();
      p.diagonal = M.diagonal();
      p.frob_sq = M.squaredNorm();
      p.row_norms_sq.resize(p.n);
      for (Eigen::Index i = 0; i < p.n; ++i) p.row_norms_sq[i] = M.row(i).squaredNorm();
      p.op = std::make_unique<DenseOperator>(std::move(M));
      return p;
    }
  }
  throw std::logic_error("build_problem: unreachable");
}

/// Convergence-study request: run `trials` independent estimations at every
/// probe count in `s_grid` and report error percentiles, with the matching
/// theoretical bound alongside where one exists.
struct ExperimentSpec {
  MatrixSource matrix_source;
  EstimatorKind estimator = EstimatorKind::Rademacher;
  std::vector<std::int64_t> s_grid = {1, 2, 4, 8, 16, 32, 64, 128, 256, 512};
  std::int64_t trials = 50;
  std::vector<double> percentiles = {50.0, 67.0, 80.0, 90.0};
  std::optional<Eigen::Index> element;  // absent: whole-diagonal error
  std::uint64_t master_seed = kDefaultMasterSeed;
};

/// One output row: the error percentile observed at a probe count, and the
/// theoretical accuracy bound at matching confidence delta = 1 - p/100.
/// `bound_value` is absent for estimators without a closed-form curve and at
/// p = 100 (delta = 0 has no finite bound). `bound_valid` is false when the
/// Gaussian accuracy floor (eps <= 1 in row-scaled units) is violated at
/// this (s, delta).
struct ErrorRecord {
  std::int64_t s = 0;
  double percentile = 0.0;
  double relative_error = 0.0;
  std::optional<double> bound_value;
  bool bound_valid = true;
};

struct ExperimentResult {
  std::vector<ErrorRecord> records;
  /// Set when the target diagonal (or entry) is zero and errors are reported
  /// absolutely instead of relatively.
  bool absolute_error_mode = false;
  Eigen::Index n = 0;
};

/// Nearest-rank percentile: the element of rank floor(p*N/100) + 1 (1-based,
/// clamped to N) of the ascending sample. The median of {1,2,3,4} is 3 under
/// this convention, and for odd N the 50th percentile is the middle element.
inline double percentile_nearest_rank(const std::vector<double>& sorted_ascending,
                                      double p) {
  const auto N = sorted_ascending.size();
  if (N == 0) throw std::invalid_argument("percentile_nearest_rank: empty sample");
  if (!(p > 0.0) || !(p <= 100.0))
    throw std::invalid_argument("percentile_nearest_rank: percentile must be in (0, 100]");
  auto rank = static_cast<std::size_t>(std::floor(p * static_cast<double>(N) / 100.0)) + 1;
  if (rank > N) rank = N;
  return sorted_ascending[rank - 1];
}

namespace detail {

/// Runs fn(j) for j in [0, jobs) on `threads` workers (0 = hardware count).
/// Job payloads must write only to their own slot; the first exception wins
/// and is rethrown on the caller.
template <typename Fn>
void parallel_for_jobs(std::int64_t jobs, int threads, Fn&& fn) {
  int workers = threads > 0 ? threads
                            : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  if (workers > jobs) workers = static_cast<int>(jobs);
  if (workers <= 1) {
    for (std::int64_t j = 0; j < jobs; ++j) fn(j);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::int64_t j = next.fetch_add(1, std::memory_order_relaxed);
        if (j >= jobs) return;
        try {
          fn(j);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(jobs, std::memory_order_relaxed);
          return;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Runs the full study. Each (s, trial) pair gets its own probe substream
/// keyed by trial_index = s_index * trials + trial, so results do not depend
/// on thread scheduling and identical specs reproduce identical records.
inline ExperimentResult run_experiment(const ExperimentSpec& spec, int threads = 0) {
  if (spec.s_grid.empty()) throw std::invalid_argument("run_experiment: empty s grid");
  for (std::size_t i = 0; i < spec.s_grid.size(); ++i) {
    if (spec.s_grid[i] < 1)
      throw std::invalid_argument("run_experiment: probe counts must be >= 1");
    if (i > 0 && spec.s_grid[i] <= spec.s_grid[i - 1])
      throw std::invalid_argument("run_experiment: s grid must be strictly ascending");
  }
  if (spec.trials < 1) throw std::invalid_argument("run_experiment: trials must be >= 1");
  if (spec.percentiles.empty())
    throw std::invalid_argument("run_experiment: no percentiles requested");
  for (double p : spec.percentiles)
    if (!(p > 0.0) || !(p <= 100.0))
      throw std::invalid_argument("run_experiment: percentiles must be in (0, 100]");
  const std::int64_t min_s = spec.s_grid.front();
  if (spec.estimator == EstimatorKind::Diagpp && min_s < 3)
    throw std::invalid_argument("run_experiment: diagpp needs a budget of at least 3");
  if (spec.estimator == EstimatorKind::ProjectionOnly && min_s < 2)
    throw std::invalid_argument("run_experiment: projection-only needs a budget of at least 2");

  Problem problem = build_problem(spec.matrix_source);
  const Eigen::Index n = problem.n;

  ExperimentResult result;
  result.n = n;

  double denom = 0.0;
  double bound_scale_sq = 0.0;  // absolute-error scale under the bound, squared
  if (spec.element) {
    const Eigen::Index i = *spec.element;
    if (i < 0 || i >= n)
      throw std::invalid_argument("run_experiment: element index out of range");
    const double dii = problem.diagonal[i];
    result.absolute_error_mode = dii == 0.0;
    denom = result.absolute_error_mode ? 1.0 : std::abs(dii);
    bound_scale_sq = std::max(0.0, problem.row_norms_sq[i] - dii * dii);
  } else {
    const double diag_norm = problem.diagonal.norm();
    result.absolute_error_mode = diag_norm == 0.0;
    denom = result.absolute_error_mode ? 1.0 : diag_norm;
    bound_scale_sq = std::max(0.0, problem.frob_sq - problem.diagonal.squaredNorm());
  }

  const ProbeDistribution dist = spec.estimator == EstimatorKind::Gaussian
                                     ? ProbeDistribution::Gaussian
                                     : ProbeDistribution::Rademacher;

  const auto n_s = static_cast<std::int64_t>(spec.s_grid.size());
  const std::int64_t jobs = n_s * spec.trials;
  std::vector<double> errors(static_cast<std::size_t>(jobs), 0.0);

  const LinearOperator& op = *problem.op;
  detail::parallel_for_jobs(jobs, threads, [&](std::int64_t j) {
    const std::int64_t si = j / spec.trials;
    const std::int64_t s = spec.s_grid[static_cast<std::size_t>(si)];
    ProbeStream stream(n, dist, spec.master_seed, static_cast<std::uint64_t>(j));
    Eigen::VectorXd estimate;
    switch (spec.estimator) {
      case EstimatorKind::Rademacher:
      case EstimatorKind::Gaussian:
        estimate = estimate_diagonal(op, s, dist, stream).values;
        break;
      case EstimatorKind::Diagpp: {
        DiagppConfig cfg;
        cfg.s_total = s;
        estimate = diagpp(op, cfg, stream).diagonal;
        break;
      }
      case EstimatorKind::ProjectionOnly:
        estimate = projection_only_diagonal(op, s, stream).diagonal;
        break;
    }
    const double err = spec.element
                           ? std::abs(estimate[*spec.element] - problem.diagonal[*spec.element])
                           : (estimate - problem.diagonal).norm();
    errors[static_cast<std::size_t>(j)] = err / denom;
  });

  std::vector<double> percentiles = spec.percentiles;
  std::sort(percentiles.begin(), percentiles.end());

  const bool has_bound = spec.estimator == EstimatorKind::Rademacher ||
                         spec.estimator == EstimatorKind::Gaussian;
  // In relative mode the bound on |err|/denom is eps_row(s) * sqrt(ratio)
  // with ratio the off-diagonal-to-target mass; in absolute mode the
  // row-norm scale enters directly.
  const double ratio_sq = bound_scale_sq / (denom * denom);

  for (std::int64_t si = 0; si < n_s; ++si) {
    std::vector<double> sample(
        errors.begin() + static_cast<std::ptrdiff_t>(si * spec.trials),
        errors.begin() + static_cast<std::ptrdiff_t>((si + 1) * spec.trials));
    std::sort(sample.begin(), sample.end());
    const std::int64_t s = spec.s_grid[static_cast<std::size_t>(si)];
    for (double p : percentiles) {
      ErrorRecord rec;
      rec.s = s;
      rec.percentile = p;
      rec.relative_error = percentile_nearest_rank(sample, p);
      if (has_bound && p < 100.0) {
        const double delta = 1.0 - p / 100.0;
        double base;
        if (spec.element)
          base = dist == ProbeDistribution::Rademacher
                     ? detail::rademacher_element_base(delta)
                     : detail::gaussian_element_base(delta);
        else
          base = dist == ProbeDistribution::Rademacher
                     ? detail::rademacher_full_base(delta, n)
                     : detail::gaussian_full_base(delta, n);
        const double eps_row = std::sqrt(base / static_cast<double>(s));
        rec.bound_value = eps_row * std::sqrt(ratio_sq);
        rec.bound_valid =
            dist == ProbeDistribution::Rademacher || eps_row <= 1.0 + 1e-12;
      }
      result.records.push_back(std::move(rec));
    }
  }
  return result;
}

/// CSV with one header line and one line per record, floats in shortest
/// round-trip form. Identical records always serialize to identical bytes.
inline void emit_csv(const std::vector<ErrorRecord>& records, std::ostream& out) {
  out << "s,percentile,relative_error,bound_value,bound_valid\n";
  for (const auto& rec : records) {
    out << rec.s << ',' << detail::format_double(rec.percentile) << ','
        << detail::format_double(rec.relative_error) << ',';
    if (rec.bound_value) out << detail::format_double(*rec.bound_value);
    out << ',' << (rec.bound_valid ? "true" : "false") << '\n';
  }
}

inline void emit_csv(const std::vector<ErrorRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_csv: cannot open '" + path + "'");
  emit_csv(records, out);
  if (!out) throw std::runtime_error("emit_csv: write failed for '" + path + "'");
}

}  // namespace diagest
