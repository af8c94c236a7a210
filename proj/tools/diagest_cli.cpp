// Command-line frontend for the diagonal estimation toolkit.
//
// Subcommands:
//   estimate    run one stochastic diagonal estimation and report its error
//   bound       evaluate a sufficient-query-count bound
//   diagnose    print the structure constants of a matrix
//   diagpp      run the projection + residual estimator once
//   experiment  percentile convergence study, written as CSV
//   gen-matrix  write a generated test matrix as a Matrix Market file

#include <CLI11.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "diagest/diagest.hpp"

namespace {

using namespace diagest;

std::string format_count(std::int64_t s) { return std::to_string(s); }

void print_bound(const std::string& label, const QueryBoundResult& r) {
  std::cout << label << ": s = " << format_count(r.s)
            << "  (raw bound " << detail::format_double(r.raw_bound) << ", "
            << (r.valid ? "valid" : "NOT VALID") << ")\n";
  if (!r.validity_note.empty()) std::cout << "  note: " << r.validity_note << "\n";
}

/// Matrix forms the diagnose subcommand works from: dense when it fits,
/// sparse otherwise, plus the exact factorization when the source provides
/// one.
struct DiagnoseInput {
  std::optional<Eigen::MatrixXd> dense;
  std::optional<Eigen::SparseMatrix<double>> sparse;
  std::optional<EigenFactorization> eig;
  bool symmetric = false;
  Eigen::Index n = 0;
};

DiagnoseInput load_for_diagnosis(const MatrixSource& src) {
  DiagnoseInput in;
  switch (src.kind) {
    case MatrixSource::Kind::PowerLaw: {
      PowerLawPsd psd = generate_power_law_psd({src.n, src.c, src.seed});
      in.n = src.n;
      in.symmetric = true;
      in.dense = std::move(psd.matrix);
      in.eig = std::move(psd.eig);
      return in;
    }
    case MatrixSource::Kind::Identity: {
      in.n = src.n;
      in.symmetric = true;
      if (src.n <= 5000) {
        in.dense = Eigen::MatrixXd::Identity(src.n, src.n);
        in.eig = EigenFactorization{Eigen::MatrixXd::Identity(src.n, src.n),
                                    Eigen::VectorXd::Ones(src.n)};
      } else {
        Eigen::SparseMatrix<double> I(src.n, src.n);
        I.setIdentity();
        in.sparse = std::move(I);
      }
      return in;
    }
    case MatrixSource::Kind::MatrixMarket: {
      MatrixMarketData data = load_matrix_market(src.path);
      in.n = data.matrix.rows();
      in.symmetric = data.symmetric;
      if (in.n <= 5000)
        in.dense = data.to_dense();
      else
        in.sparse = std::move(data.matrix);
      return in;
    }
    case MatrixSource::Kind::DenseFile: {
      Eigen::MatrixXd M = load_dense_table(src.path);
      in.n = M.rows();
      in.symmetric = is_symmetric_within(M);
      in.dense = std::move(M);
      return in;
    }
  }
  throw std::logic_error("load_for_diagnosis: unreachable");
}

void print_optional(const char* name, const std::optional<double>& v) {
  std::cout << name << ": ";
  if (v)
    std::cout << detail::format_double(*v) << "\n";
  else
    std::cout << "unavailable\n";
}

int run_estimate(const std::string& matrix, ProbeDistribution dist, std::int64_t s,
                 std::uint64_t seed, std::optional<Eigen::Index> element,
                 const std::string& out_path) {
  Problem problem = build_problem(parse_matrix_source(matrix, seed));
  ProbeStream stream(problem.n, dist, seed, 0);
  const DiagonalEstimate est = estimate_diagonal(*problem.op, s, dist, stream);

  std::cout << "n: " << problem.n << "\n";
  std::cout << "distribution: " << to_string(dist) << "\n";
  std::cout << "probes: " << s << "\n";
  std::cout << "oracle matvecs: " << problem.op->matvec_count() << "\n";
  if (element) {
    if (*element < 0 || *element >= problem.n)
      throw std::invalid_argument("estimate: element index out of range");
    const double truth = problem.diagonal[*element];
    const double err = std::abs(est.values[*element] - truth);
    std::cout << "element " << *element << ": estimate "
              << detail::format_double(est.values[*element]) << ", true "
              << detail::format_double(truth) << "\n";
    std::cout << (truth == 0.0 ? "absolute error: " : "relative error: ")
              << detail::format_double(truth == 0.0 ? err : err / std::abs(truth)) << "\n";
  } else {
    const double diag_norm = problem.diagonal.norm();
    const double err = (est.values - problem.diagonal).norm();
    std::cout << (diag_norm == 0.0 ? "absolute error: " : "relative error: ")
              << detail::format_double(diag_norm == 0.0 ? err : err / diag_norm) << "\n";
  }
  if (dist == ProbeDistribution::Rademacher)
    std::cout << "trace estimate (hutchinson): "
              << detail::format_double(hutchinson_trace_from_estimate(est))
              << "  (true " << detail::format_double(problem.diagonal.sum()) << ")\n";

  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("estimate: cannot open '" + out_path + "'");
    out << "index,estimate,true_value,abs_error\n";
    for (Eigen::Index i = 0; i < problem.n; ++i)
      out << i << ',' << detail::format_double(est.values[i]) << ','
          << detail::format_double(problem.diagonal[i]) << ','
          << detail::format_double(std::abs(est.values[i] - problem.diagonal[i])) << "\n";
    std::cout << "estimate written to " << out_path << "\n";
  }
  return 0;
}

int run_diagnose(const std::string& matrix, std::uint64_t seed,
                 std::optional<Eigen::Index> element) {
  DiagnoseInput in = load_for_diagnosis(parse_matrix_source(matrix, seed));
  MatrixConstants constants;
  if (in.dense) {
    constants = matrix_constants(*in.dense, in.eig ? &*in.eig : nullptr);
    if (!in.eig && in.symmetric) {
      // No exact factorization supplied; fall back to a dense eigensolve.
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(*in.dense);
      EigenFactorization eig;
      eig.lambda = es.eigenvalues().reverse();
      eig.V = es.eigenvectors().rowwise().reverse();
      constants = matrix_constants(*in.dense, &eig);
    }
  } else {
    constants = matrix_constants(*in.sparse);
    constants.notes.push_back("n > 5000: eigendecomposition skipped");
  }

  std::cout << "n: " << constants.n << "\n";
  std::cout << "symmetric: " << (in.symmetric ? "yes" : "no") << "\n";
  std::cout << "trace: " << detail::format_double(constants.trace) << "\n";
  std::cout << "frobenius_sq: " << detail::format_double(constants.frob_sq) << "\n";
  std::cout << "diag_norm_sq: " << detail::format_double(constants.diag_norm_sq) << "\n";
  print_optional("full_ratio", constants.full_ratio);
  print_optional("trace_over_diag_norm", constants.trace_over_diag_norm);
  print_optional("kappa2", constants.kappa2);
  print_optional("kappa_d", constants.kappa_d);
  print_optional("sigma_min_vv", constants.sigma_min_vv);
  print_optional("hadamard_residual", constants.hadamard_residual);
  if (constants.lambda) {
    std::cout << "lambda_max: " << detail::format_double(constants.lambda->maxCoeff())
              << "\n";
    std::cout << "lambda_min: " << detail::format_double(constants.lambda->minCoeff())
              << "\n";
    if (in.dense)
      std::cout << "psd_row_bound: "
                << (check_psd_row_bound(*in.dense, constants.lambda->maxCoeff()) ? "holds"
                                                                                 : "violated")
                << "\n";
  }
  if (element) {
    if (*element < 0 || *element >= constants.n)
      throw std::invalid_argument("diagnose: element index out of range");
    std::cout << "row_ratio[" << *element
              << "]: " << detail::format_double(constants.row_ratios[*element]) << "\n";
  }
  for (const auto& note : constants.notes) std::cout << "note: " << note << "\n";
  return 0;
}

int run_diagpp_once(const std::string& matrix, std::int64_t s,
                    const std::vector<std::int64_t>& split, ProbeDistribution dist,
                    std::uint64_t seed, const std::string& out_path) {
  Problem problem = build_problem(parse_matrix_source(matrix, seed));
  DiagppConfig cfg;
  cfg.s_total = s;
  cfg.dist = dist;
  if (!split.empty()) {
    if (split.size() != 3)
      throw std::invalid_argument("diagpp: --split needs exactly three parts");
    cfg.split = std::array<std::int64_t, 3>{split[0], split[1], split[2]};
  }
  ProbeStream stream(problem.n, dist, seed, 0);
  const DiagppResult res = diagpp(*problem.op, cfg, stream);

  const auto parts = resolve_split(cfg);
  std::cout << "n: " << problem.n << "\n";
  std::cout << "budget: " << s << " (sketch " << parts[0] << ", projection " << parts[1]
            << ", residual " << parts[2] << ")\n";
  std::cout << "rank captured: " << res.rank << "\n";
  std::cout << "oracle matvecs: " << res.matvecs_used << "\n";
  std::cout << "projected part norm: " << detail::format_double(res.projected_part.norm())
            << "\n";
  std::cout << "residual part norm: " << detail::format_double(res.residual_part.norm())
            << "\n";
  const double diag_norm = problem.diagonal.norm();
  const double err = (res.diagonal - problem.diagonal).norm();
  std::cout << (diag_norm == 0.0 ? "absolute error: " : "relative error: ")
            << detail::format_double(diag_norm == 0.0 ? err : err / diag_norm) << "\n";

  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("diagpp: cannot open '" + out_path + "'");
    out << "index,estimate,projected,residual,true_value\n";
    for (Eigen::Index i = 0; i < problem.n; ++i)
      out << i << ',' << detail::format_double(res.diagonal[i]) << ','
          << detail::format_double(res.projected_part[i]) << ','
          << detail::format_double(res.residual_part[i]) << ','
          << detail::format_double(problem.diagonal[i]) << "\n";
    std::cout << "estimate written to " << out_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic diagonal estimation toolkit"};
  app.require_subcommand(1);

  const std::map<std::string, ProbeDistribution> dist_names{
      {"rademacher", ProbeDistribution::Rademacher},
      {"gaussian", ProbeDistribution::Gaussian}};
  const std::map<std::string, EstimatorKind> estimator_names{
      {"rademacher", EstimatorKind::Rademacher},
      {"gaussian", EstimatorKind::Gaussian},
      {"diagpp", EstimatorKind::Diagpp},
      {"projection-only", EstimatorKind::ProjectionOnly}};
  const std::map<std::string, BoundKind> kind_names{
      {"row-dependent", BoundKind::RowDependentElement},
      {"relative", BoundKind::RelativeElement},
      {"full", BoundKind::RowDependentFullDiagonal},
      {"relative-full", BoundKind::RelativeFullDiagonal},
      {"kappa2", BoundKind::Kappa2},
      {"kappa-d", BoundKind::KappaDiag},
      {"eigenvector", BoundKind::EigenvectorSigma},
      {"diagpp", BoundKind::DiagppRelative}};

  // --- estimate ---
  auto* est_cmd = app.add_subcommand("estimate", "Run one diagonal estimation");
  std::string est_matrix;
  ProbeDistribution est_dist = ProbeDistribution::Rademacher;
  std::int64_t est_s = 64;
  std::uint64_t est_seed = kDefaultMasterSeed;
  std::int64_t est_element = -1;
  std::string est_out;
  est_cmd->add_option("--matrix", est_matrix,
                      "matrix source: powerlaw:N,C | identity:N | file.mtx | dense file")
      ->required();
  est_cmd->add_option("--dist", est_dist, "probe distribution")
      ->transform(CLI::CheckedTransformer(dist_names, CLI::ignore_case));
  est_cmd->add_option("--s", est_s, "number of probes (oracle matvecs)");
  est_cmd->add_option("--seed", est_seed, "master seed");
  est_cmd->add_option("--element", est_element, "zero-based diagonal index to report");
  est_cmd->add_option("--out", est_out, "write the full estimate as CSV");

  // --- bound ---
  auto* bound_cmd = app.add_subcommand("bound", "Evaluate a sufficient-query bound");
  BoundKind bound_kind = BoundKind::RowDependentElement;
  ProbeDistribution bound_dist = ProbeDistribution::Rademacher;
  double bound_eps = 0.0, bound_delta = 0.0;
  std::int64_t bound_n = 0;
  double opt_row_ratio = -1.0, opt_full_ratio = -1.0, opt_kappa = 0.0,
         opt_sigma_min = -1.0, opt_lambda_norm_sq = -1.0, opt_diag_norm_sq = -1.0,
         opt_trace_ratio = 0.0;
  bound_cmd->add_option("--kind", bound_kind,
                        "row-dependent | relative | full | relative-full | kappa2 | "
                        "kappa-d | eigenvector | diagpp")
      ->transform(CLI::CheckedTransformer(kind_names, CLI::ignore_case))
      ->required();
  bound_cmd->add_option("--dist", bound_dist, "probe distribution")
      ->transform(CLI::CheckedTransformer(dist_names, CLI::ignore_case));
  bound_cmd->add_option("--eps", bound_eps, "target accuracy")->required();
  bound_cmd->add_option("--delta", bound_delta, "failure probability")->required();
  bound_cmd->add_option("--n", bound_n, "matrix dimension (whole-diagonal bounds)");
  bound_cmd->add_option("--row-ratio", opt_row_ratio,
                        "(||A_i||^2 - A_ii^2) / A_ii^2 for the relative element bound");
  bound_cmd->add_option("--full-ratio", opt_full_ratio,
                        "(||A||_F^2 - ||A_d||^2) / ||A_d||^2 for the relative full bound");
  bound_cmd->add_option("--kappa", opt_kappa, "condition number for kappa bounds");
  bound_cmd->add_option("--sigma-min", opt_sigma_min, "sigma_min(V.*V)");
  bound_cmd->add_option("--lambda-norm-sq", opt_lambda_norm_sq, "||lambda||^2");
  bound_cmd->add_option("--diag-norm-sq", opt_diag_norm_sq, "||A_d||^2");
  bound_cmd->add_option("--trace-ratio", opt_trace_ratio, "trace(A) / ||A_d||_2");

  // --- diagnose ---
  auto* diag_cmd = app.add_subcommand("diagnose", "Print matrix structure constants");
  std::string diag_matrix;
  std::uint64_t diag_seed = kDefaultMasterSeed;
  std::int64_t diag_element = -1;
  diag_cmd->add_option("--matrix", diag_matrix, "matrix source")->required();
  diag_cmd->add_option("--seed", diag_seed, "generator seed for powerlaw sources");
  diag_cmd->add_option("--element", diag_element, "zero-based row whose ratio to print");

  // --- diagpp ---
  auto* dpp_cmd = app.add_subcommand("diagpp", "Run the projection + residual estimator");
  std::string dpp_matrix;
  std::int64_t dpp_s = 120;
  std::vector<std::int64_t> dpp_split;
  ProbeDistribution dpp_dist = ProbeDistribution::Rademacher;
  std::uint64_t dpp_seed = kDefaultMasterSeed;
  std::string dpp_out;
  dpp_cmd->add_option("--matrix", dpp_matrix, "matrix source")->required();
  dpp_cmd->add_option("--s", dpp_s, "total oracle budget");
  dpp_cmd->add_option("--split", dpp_split, "sketch,projection,residual budgets")
      ->delimiter(',');
  dpp_cmd->add_option("--dist", dpp_dist, "residual probe distribution")
      ->transform(CLI::CheckedTransformer(dist_names, CLI::ignore_case));
  dpp_cmd->add_option("--seed", dpp_seed, "master seed");
  dpp_cmd->add_option("--out", dpp_out, "write the estimate as CSV");

  // --- experiment ---
  auto* exp_cmd = app.add_subcommand("experiment", "Percentile convergence study -> CSV");
  std::string exp_matrix, exp_out;
  EstimatorKind exp_estimator = EstimatorKind::Rademacher;
  std::vector<std::int64_t> exp_s_grid;
  std::int64_t exp_trials = 50;
  std::vector<double> exp_percentiles;
  std::int64_t exp_element = -1;
  std::uint64_t exp_seed = kDefaultMasterSeed;
  int exp_threads = 0;
  exp_cmd->add_option("--matrix", exp_matrix, "matrix source")->required();
  exp_cmd->add_option("--estimator", exp_estimator,
                      "rademacher | gaussian | diagpp | projection-only")
      ->transform(CLI::CheckedTransformer(estimator_names, CLI::ignore_case));
  exp_cmd->add_option("--s-grid", exp_s_grid, "probe counts (default: powers of two 1..512)")
      ->delimiter(',');
  exp_cmd->add_option("--trials", exp_trials, "independent estimations per probe count");
  exp_cmd->add_option("--percentiles", exp_percentiles,
                      "error percentiles to report (default: 50,67,80,90)")
      ->delimiter(',');
  exp_cmd->add_option("--element", exp_element, "zero-based element target (default: full)");
  exp_cmd->add_option("--seed", exp_seed, "master seed");
  exp_cmd->add_option("--threads", exp_threads, "worker threads (0 = hardware)");
  exp_cmd->add_option("--out", exp_out, "output CSV path")->required();

  // --- gen-matrix ---
  auto* gen_cmd = app.add_subcommand("gen-matrix", "Write a generated matrix as .mtx");
  std::string gen_matrix, gen_out;
  std::uint64_t gen_seed = kDefaultMasterSeed;
  gen_cmd->add_option("--matrix", gen_matrix, "powerlaw:N,C or identity:N")->required();
  gen_cmd->add_option("--seed", gen_seed, "generator seed");
  gen_cmd->add_option("--out", gen_out, "output .mtx path")->required();

  try {
    app.parse(argc, argv);

    if (est_cmd->parsed())
      return run_estimate(est_matrix, est_dist, est_s, est_seed,
                          est_element >= 0 ? std::optional<Eigen::Index>(est_element)
                                           : std::nullopt,
                          est_out);

    if (bound_cmd->parsed()) {
      const EpsDelta ed(bound_eps, bound_delta);
      auto need = [&](bool ok, const char* what) {
        if (!ok)
          throw std::invalid_argument(std::string("bound: this kind needs ") + what);
      };
      switch (bound_kind) {
        case BoundKind::RowDependentElement:
          print_bound("row-dependent element (" + std::string(to_string(bound_dist)) + ")",
                      bound_row_dependent(bound_dist, ed));
          break;
        case BoundKind::RelativeElement:
          need(opt_row_ratio >= 0.0, "--row-ratio");
          print_bound("relative element (" + std::string(to_string(bound_dist)) + ")",
                      bound_relative_element(bound_dist, ed, opt_row_ratio));
          break;
        case BoundKind::RowDependentFullDiagonal:
          need(bound_n >= 1, "--n");
          print_bound("full diagonal (" + std::string(to_string(bound_dist)) + ")",
                      bound_full_diagonal(bound_dist, ed, bound_n));
          break;
        case BoundKind::RelativeFullDiagonal:
          need(bound_n >= 1, "--n");
          need(opt_full_ratio >= 0.0, "--full-ratio");
          print_bound("relative full diagonal (" + std::string(to_string(bound_dist)) + ")",
                      bound_full_diagonal(bound_dist, ed, bound_n, true, opt_full_ratio));
          break;
        case BoundKind::Kappa2:
        case BoundKind::KappaDiag:
          need(bound_n >= 1, "--n");
          need(opt_kappa >= 1.0, "--kappa >= 1");
          print_bound(bound_kind == BoundKind::Kappa2 ? "kappa2 relative full diagonal"
                                                      : "kappa-d relative full diagonal",
                      bound_kappa(ed, bound_n, opt_kappa, bound_kind));
          break;
        case BoundKind::EigenvectorSigma:
          need(bound_n >= 1, "--n");
          need(opt_sigma_min >= 0.0, "--sigma-min");
          need(opt_lambda_norm_sq >= 0.0, "--lambda-norm-sq");
          need(opt_diag_norm_sq > 0.0, "--diag-norm-sq");
          print_bound("eigenvector relative full diagonal",
                      bound_eigenvector(ed, bound_n, opt_sigma_min, opt_lambda_norm_sq,
                                        opt_diag_norm_sq));
          break;
        case BoundKind::DiagppRelative: {
          need(bound_n >= 1, "--n");
          need(opt_trace_ratio >= 1.0, "--trace-ratio >= 1");
          const DiagppQueryBound b = diagpp_query_bound(ed, bound_n, opt_trace_ratio);
          print_bound("diagpp idealized", b.idealized);
          print_bound("diagpp randomized sketch", b.randomized);
          break;
        }
      }
      return 0;
    }

    if (diag_cmd->parsed())
      return run_diagnose(diag_matrix, diag_seed,
                          diag_element >= 0 ? std::optional<Eigen::Index>(diag_element)
                                            : std::nullopt);

    if (dpp_cmd->parsed())
      return run_diagpp_once(dpp_matrix, dpp_s, dpp_split, dpp_dist, dpp_seed, dpp_out);

    if (exp_cmd->parsed()) {
      ExperimentSpec spec;
      spec.matrix_source = parse_matrix_source(exp_matrix, exp_seed);
      spec.estimator = exp_estimator;
      if (!exp_s_grid.empty()) spec.s_grid = exp_s_grid;
      spec.trials = exp_trials;
      if (!exp_percentiles.empty()) spec.percentiles = exp_percentiles;
      if (exp_element >= 0) spec.element = exp_element;
      spec.master_seed = exp_seed;
      const ExperimentResult result = run_experiment(spec, exp_threads);
      emit_csv(result.records, exp_out);
      std::cout << "n: " << result.n << "\n";
      std::cout << "records: " << result.records.size() << " -> " << exp_out << "\n";
      if (result.absolute_error_mode)
        std::cout << "note: target diagonal is zero; errors reported absolutely\n";
      return 0;
    }

    if (gen_cmd->parsed()) {
      const MatrixSource src = parse_matrix_source(gen_matrix, gen_seed);
      Eigen::MatrixXd M;
      if (src.kind == MatrixSource::Kind::PowerLaw)
        M = generate_power_law_psd({src.n, src.c, src.seed}).matrix;
      else if (src.kind == MatrixSource::Kind::Identity)
        M = Eigen::MatrixXd::Identity(src.n, src.n);
      else
        throw std::invalid_argument("gen-matrix: source must be powerlaw:N,C or identity:N");
      write_matrix_market(gen_out, M, true);
      std::cout << "wrote " << M.rows() << "x" << M.cols() << " matrix to " << gen_out
                << "\n";
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
