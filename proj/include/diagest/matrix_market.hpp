#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "diagest/format.hpp"
#include "diagest/operators.hpp"

namespace diagest {

/// Parsed Matrix Market file. Storage is sparse regardless of the file's
/// format; densify with to_dense() when the size allows it.
struct MatrixMarketData {
  Eigen::SparseMatrix<double> matrix;
  bool symmetric = false;  // header declared "symmetric"

  Eigen::MatrixXd to_dense() const { return Eigen::MatrixXd(matrix); }
};

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

[[noreturn]] inline void mm_fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("matrix market file '" + path + "': " + what);
}

}  // namespace detail

/// Reads a Matrix Market file. Supported: object "matrix", formats
/// "coordinate" and "array", fields "real"/"integer", symmetries "general"
/// and "symmetric" (mirrored on read). "pattern" and "complex" fields and
/// other symmetries are rejected. Matrices must be square.
inline MatrixMarketData load_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) detail::mm_fail(path, "cannot open file");

  std::string banner;
  if (!std::getline(in, banner)) detail::mm_fail(path, "empty file");
  std::istringstream bs(banner);
  std::string tag, object, format, field, symmetry;
  bs >> tag >> object >> format >> field >> symmetry;
  if (detail::lower(tag) != "%%matrixmarket")
    detail::mm_fail(path, "missing %%MatrixMarket banner");
  object = detail::lower(object);
  format = detail::lower(format);
  field = detail::lower(field);
  symmetry = detail::lower(symmetry);

  if (object != "matrix") detail::mm_fail(path, "unsupported object '" + object + "'");
  if (format != "coordinate" && format != "array")
    detail::mm_fail(path, "unsupported format '" + format + "'");
  if (field == "pattern" || field == "complex")
    detail::mm_fail(path, "unsupported field '" + field + "' (real entries required)");
  if (field != "real" && field != "integer")
    detail::mm_fail(path, "unsupported field '" + field + "'");
  if (symmetry != "general" && symmetry != "symmetric")
    detail::mm_fail(path, "unsupported symmetry '" + symmetry + "'");
  const bool symmetric = symmetry == "symmetric";

  // Skip comments and blank lines up to the size line.
  std::string line;
  while (std::getline(in, line)) {
    const auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos) continue;
    if (line[pos] == '%') continue;
    break;
  }
  if (!in && line.empty()) detail::mm_fail(path, "missing size line");

  std::istringstream sizes(line);
  long rows = 0, cols = 0, nnz = 0;
  if (format == "coordinate") {
    if (!(sizes >> rows >> cols >> nnz)) detail::mm_fail(path, "malformed size line");
  } else {
    if (!(sizes >> rows >> cols)) detail::mm_fail(path, "malformed size line");
  }
  if (rows < 1 || cols < 1) detail::mm_fail(path, "non-positive dimensions");
  if (rows != cols)
    detail::mm_fail(path, "matrix must be square, got " + std::to_string(rows) + "x" +
                              std::to_string(cols));

  std::vector<Eigen::Triplet<double>> trips;
  if (format == "coordinate") {
    trips.reserve(static_cast<std::size_t>(symmetric ? 2 * nnz : nnz));
    long i, j;
    double v;
    for (long k = 0; k < nnz; ++k) {
      if (!(in >> i >> j >> v))
        detail::mm_fail(path, "expected " + std::to_string(nnz) + " entries, file ends at " +
                                  std::to_string(k));
      if (i < 1 || i > rows || j < 1 || j > cols)
        detail::mm_fail(path, "entry index (" + std::to_string(i) + "," + std::to_string(j) +
                                  ") out of range");
      if (symmetric && j > i)
        detail::mm_fail(path, "symmetric file stores an upper-triangle entry (" +
                                  std::to_string(i) + "," + std::to_string(j) + ")");
      trips.emplace_back(i - 1, j - 1, v);
      if (symmetric && i != j) trips.emplace_back(j - 1, i - 1, v);
    }
  } else {
    // Array format: column-major dense values; symmetric files store the
    // lower triangle only.
    double v;
    if (symmetric) {
      for (long j = 0; j < cols; ++j)
        for (long i = j; i < rows; ++i) {
          if (!(in >> v)) detail::mm_fail(path, "array data ends early");
          if (v != 0.0) {
            trips.emplace_back(i, j, v);
            if (i != j) trips.emplace_back(j, i, v);
          }
        }
    } else {
      for (long j = 0; j < cols; ++j)
        for (long i = 0; i < rows; ++i) {
          if (!(in >> v)) detail::mm_fail(path, "array data ends early");
          if (v != 0.0) trips.emplace_back(i, j, v);
        }
    }
  }

  MatrixMarketData out;
  out.symmetric = symmetric;
  out.matrix.resize(rows, cols);
  out.matrix.setFromTriplets(trips.begin(), trips.end());
  out.matrix.makeCompressed();
  return out;
}

/// Writes a dense matrix in Matrix Market array format. With as_symmetric
/// set, the matrix must actually be symmetric and only the lower triangle is
/// stored. Values are written in shortest round-trip form.
inline void write_matrix_market(const std::string& path,
                                const Eigen::Ref<const Eigen::MatrixXd>& M,
                                bool as_symmetric = false) {
  if (as_symmetric) {
    require_square(M, "write_matrix_market");
    if (!is_symmetric_within(M))
      throw std::invalid_argument(
          "write_matrix_market: matrix is not symmetric within tolerance");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_matrix_market: cannot open '" + path + "'");
  out << "%%MatrixMarket matrix array real " << (as_symmetric ? "symmetric" : "general")
      << "\n";
  out << M.rows() << " " << M.cols() << "\n";
  if (as_symmetric) {
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      for (Eigen::Index i = j; i < M.rows(); ++i)
        out << detail::format_double(M(i, j)) << "\n";
  } else {
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      for (Eigen::Index i = 0; i < M.rows(); ++i)
        out << detail::format_double(M(i, j)) << "\n";
  }
  if (!out) throw std::runtime_error("write_matrix_market: write failed for '" + path + "'");
}

}  // namespace diagest
