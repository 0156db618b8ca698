#include "ehlod/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ehlod {

Vector SparseMatrix::apply(const Vector& x) const {
  if (x.size() != cols())
    throw std::invalid_argument("spmv dimension mismatch: " + std::to_string(cols()) +
                                " columns vs vector of size " + std::to_string(x.size()));
  return m_ * x;
}

bool SparseMatrix::symmetric_within(double tol) const {
  if (rows() != cols()) return false;
  double scale = std::max(max_abs(), 1e-300);
  Storage d = m_ - Storage(m_.transpose());
  for (index_t k = 0; k < d.outerSize(); ++k)
    for (Storage::InnerIterator it(d, k); it; ++it)
      if (std::abs(it.value()) > tol * scale) return false;
  return true;
}

double SparseMatrix::max_abs() const {
  double m = 0.0;
  for (index_t k = 0; k < m_.outerSize(); ++k)
    for (Storage::InnerIterator it(m_, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

std::vector<Triplet> SparseMatrix::triplets() const {
  std::vector<Triplet> out;
  out.reserve(nnz());
  for (index_t k = 0; k < m_.outerSize(); ++k)
    for (Storage::InnerIterator it(m_, k); it; ++it)
      out.push_back({it.row(), it.col(), it.value()});
  return out;
}

SparseMatrix assemble(index_t rows, index_t cols, const std::vector<Triplet>& triplets) {
  for (const auto& t : triplets)
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
      throw std::invalid_argument("triplet index (" + std::to_string(t.row) + ", " +
                                  std::to_string(t.col) + ") out of range");
  // Canonical summation order makes the result independent of triplet order.
  std::vector<Triplet> sorted = triplets;
  std::sort(sorted.begin(), sorted.end(), [](const Triplet& a, const Triplet& b) {
    if (a.row != b.row) return a.row < b.row;
    if (a.col != b.col) return a.col < b.col;
    return a.value < b.value;
  });
  std::vector<Eigen::Triplet<double, index_t>> unique;
  unique.reserve(sorted.size());
  std::size_t i = 0;
  while (i < sorted.size()) {
    index_t r = sorted[i].row, c = sorted[i].col;
    double sum = 0.0;
    while (i < sorted.size() && sorted[i].row == r && sorted[i].col == c) sum += sorted[i++].value;
    unique.emplace_back(r, c, sum);
  }
  SparseMatrix::Storage m(rows, cols);
  m.setFromTriplets(unique.begin(), unique.end());
  m.makeCompressed();
  return SparseMatrix(std::move(m));
}

Vector spmv(const SparseMatrix& A, const Vector& x) { return A.apply(x); }

SparseMatrix normalize_columns(const SparseMatrix& M) {
  std::vector<double> norm_sq(M.cols(), 0.0);
  for (const auto& t : M.triplets()) norm_sq[t.col] += t.value * t.value;
  std::vector<Triplet> trips;
  trips.reserve(M.nnz());
  for (const auto& t : M.triplets()) {
    double n = std::sqrt(norm_sq[t.col]);
    trips.push_back({t.row, t.col, n > 0.0 ? t.value / n : t.value});
  }
  return assemble(M.rows(), M.cols(), trips);
}

SparseMatrix select(const SparseMatrix& M, const std::vector<index_t>& rows,
                    const std::vector<index_t>& col_local_of_global, index_t local_cols) {
  std::vector<Triplet> trips;
  const auto& raw = M.raw();
  for (std::size_t lr = 0; lr < rows.size(); ++lr) {
    for (SparseMatrix::Storage::InnerIterator it(raw, rows[lr]); it; ++it) {
      index_t lc = col_local_of_global[it.col()];
      if (lc >= 0) trips.push_back({static_cast<index_t>(lr), lc, it.value()});
    }
  }
  return assemble(static_cast<index_t>(rows.size()), local_cols, trips);
}

Factorization::Factorization(const SparseMatrix& A) {
  if (A.rows() != A.cols())
    throw std::invalid_argument("factorize requires a square matrix, got " +
                                std::to_string(A.rows()) + "x" + std::to_string(A.cols()));
  n_ = A.rows();
  Eigen::SparseMatrix<double, Eigen::ColMajor, index_t> cm(A.raw());
  lu_ = std::make_shared<Solver>();
  lu_->compute(cm);
  if (lu_->info() != Eigen::Success)
    throw std::runtime_error("sparse LU failed: " + lu_->lastErrorMessage());
}

Vector Factorization::solve(const Vector& b) const {
  if (b.size() != n_)
    throw std::invalid_argument("solve dimension mismatch: system of size " + std::to_string(n_) +
                                " vs right-hand side of size " + std::to_string(b.size()));
  Vector x = lu_->solve(b);
  if (lu_->info() != Eigen::Success) throw std::runtime_error("sparse LU back-substitution failed");
  return x;
}

Factorization factorize(const SparseMatrix& A) { return Factorization(A); }

Vector solve(const Factorization& F, const Vector& b) { return F.solve(b); }

}  // namespace ehlod
