#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <memory>
#include <vector>

#include "ehlod/mesh.hpp"

namespace ehlod {

using Vector = Eigen::VectorXd;

struct Triplet {
  index_t row;
  index_t col;
  double value;
};

// Compressed sparse matrix with sorted, duplicate-free entries per row.
class SparseMatrix {
 public:
  using Storage = Eigen::SparseMatrix<double, Eigen::RowMajor, index_t>;

  SparseMatrix() = default;
  SparseMatrix(index_t rows, index_t cols) : m_(rows, cols) {}
  explicit SparseMatrix(Storage m) : m_(std::move(m)) { m_.makeCompressed(); }

  index_t rows() const { return m_.rows(); }
  index_t cols() const { return m_.cols(); }
  index_t nnz() const { return m_.nonZeros(); }

  double coeff(index_t i, index_t j) const { return m_.coeff(i, j); }
  Vector apply(const Vector& x) const;
  SparseMatrix transposed() const { return SparseMatrix(Storage(m_.transpose())); }
  bool symmetric_within(double tol) const;
  double max_abs() const;

  std::vector<Triplet> triplets() const;
  const Storage& raw() const { return m_; }

 private:
  Storage m_;
};

SparseMatrix assemble(index_t rows, index_t cols, const std::vector<Triplet>& triplets);
Vector spmv(const SparseMatrix& A, const Vector& x);

// Submatrix with the given rows (in order) and the columns picked through a
// global-to-local map (-1 drops the column).
SparseMatrix select(const SparseMatrix& M, const std::vector<index_t>& rows,
                    const std::vector<index_t>& col_local_of_global, index_t local_cols);

// Columns scaled to unit Euclidean norm; the span is unchanged.
SparseMatrix normalize_columns(const SparseMatrix& M);

// Direct sparse LU factorization handle, reusable for many right-hand sides.
class Factorization {
 public:
  explicit Factorization(const SparseMatrix& A);

  index_t dim() const { return n_; }
  Vector solve(const Vector& b) const;

 private:
  using Solver = Eigen::SparseLU<Eigen::SparseMatrix<double, Eigen::ColMajor, index_t>>;
  std::shared_ptr<Solver> lu_;
  index_t n_ = 0;
};

Factorization factorize(const SparseMatrix& A);
Vector solve(const Factorization& F, const Vector& b);

}  // namespace ehlod
