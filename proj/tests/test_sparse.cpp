#include <doctest.h>

#include <algorithm>
#include <random>

#include "ehlod/sparse.hpp"
#include "oracles.hpp"

using namespace ehlod;

TEST_SUITE_BEGIN("linalg");

TEST_CASE("assemble sums duplicates") {
  SparseMatrix A = assemble(1, 1, {{0, 0, 1.0}, {0, 0, 2.0}});
  CHECK(A.nnz() == 1);
  CHECK(A.coeff(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("assemble of empty list is the zero matrix") {
  SparseMatrix A = assemble(3, 4, {});
  CHECK(A.nnz() == 0);
  Vector x = Vector::Ones(4);
  CHECK(A.apply(x).norm() == 0.0);
}

TEST_CASE("symmetric flag check") {
  SparseMatrix A = assemble(2, 2, {{0, 1, 5.0}, {1, 0, 5.0}});
  CHECK(A.symmetric_within(1e-12));
  SparseMatrix B = assemble(2, 2, {{0, 1, 5.0}, {1, 0, 4.0}});
  CHECK_FALSE(B.symmetric_within(1e-12));
}

TEST_CASE("assemble rejects out-of-range indices") {
  CHECK_THROWS_AS(assemble(2, 2, {{2, 0, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(assemble(2, 2, {{0, -1, 1.0}}), std::invalid_argument);
}

TEST_CASE("assembly result is independent of triplet order") {
  std::vector<Triplet> trips;
  auto gen = oracle::rng(7);
  for (int k = 0; k < 200; ++k)
    trips.push_back({static_cast<index_t>(gen() % 10), static_cast<index_t>(gen() % 10),
                     oracle::uniform(gen, -1, 1)});
  SparseMatrix A = assemble(10, 10, trips);
  std::shuffle(trips.begin(), trips.end(), gen);
  SparseMatrix B = assemble(10, 10, trips);
  auto ta = A.triplets(), tb = B.triplets();
  REQUIRE(ta.size() == tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) {
    CHECK(ta[i].row == tb[i].row);
    CHECK(ta[i].col == tb[i].col);
    CHECK(ta[i].value == tb[i].value);  // bitwise
  }
}

TEST_CASE("spmv basics and dense oracle") {
  SparseMatrix I = assemble(3, 3, {{0, 0, 1}, {1, 1, 1}, {2, 2, 1}});
  Vector x(3);
  x << 1, 2, 3;
  CHECK((spmv(I, x) - x).norm() == 0.0);

  SparseMatrix Z = assemble(3, 3, {});
  CHECK(spmv(Z, x).norm() == 0.0);

  auto gen = oracle::rng(11);
  std::vector<Triplet> trips;
  for (index_t i = 0; i < 5; ++i)
    for (index_t j = 0; j < 5; ++j)
      if (gen() % 2) trips.push_back({i, j, oracle::uniform(gen, -2, 2)});
  SparseMatrix A = assemble(5, 5, trips);
  Vector v = oracle::random_vector(gen, 5);
  Vector ref = oracle::dense_multiply(oracle::dense(A), v);
  CHECK((spmv(A, v) - ref).lpNorm<Eigen::Infinity>() <= 1e-14);

  CHECK_THROWS_AS(spmv(A, Vector::Ones(4)), std::invalid_argument);
}

TEST_CASE("factorize identity and an indefinite exchange matrix") {
  SparseMatrix I = assemble(3, 3, {{0, 0, 1}, {1, 1, 1}, {2, 2, 1}});
  Vector b(3);
  b << 4, 5, 6;
  CHECK((solve(factorize(I), b) - b).norm() <= 1e-14);

  SparseMatrix X = assemble(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}});
  Vector c(2);
  c << 1, 2;
  Vector x = solve(factorize(X), c);
  CHECK(x[0] == doctest::Approx(2.0));
  CHECK(x[1] == doctest::Approx(1.0));
}

TEST_CASE("1d stiffness solve matches dense Gaussian elimination") {
  // n=4 mesh, A==1, Dirichlet: tridiagonal (2,-1)/h on 3 free nodes.
  double h = 0.25;
  std::vector<Triplet> kt, mt;
  for (index_t i = 0; i < 3; ++i) {
    kt.push_back({i, i, 2.0 / h});
    mt.push_back({i, i, 4.0 * h / 6.0});
    if (i) {
      kt.push_back({i, i - 1, -1.0 / h});
      kt.push_back({i - 1, i, -1.0 / h});
      mt.push_back({i, i - 1, h / 6.0});
      mt.push_back({i - 1, i, h / 6.0});
    }
  }
  SparseMatrix K = assemble(3, 3, kt), M = assemble(3, 3, mt);
  Vector b = M.apply(Vector::Ones(3));
  Vector x = solve(factorize(K), b);
  Vector ref = oracle::gauss_solve(oracle::dense(K), b);
  CHECK((x - ref).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("round-trip residuals on random systems") {
  auto gen = oracle::rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    index_t n = 2 + static_cast<index_t>(gen() % 49);
    std::vector<Triplet> trips;
    for (index_t i = 0; i < n; ++i) {
      double diag = 0.0;
      for (index_t j = 0; j < n; ++j) {
        if (i != j && gen() % 4 == 0) {
          double v = oracle::uniform(gen, -1, 1);
          trips.push_back({i, j, v});
          diag += std::abs(v);
        }
      }
      trips.push_back({i, i, diag + 1.0});  // strict diagonal dominance
    }
    SparseMatrix A = assemble(n, n, trips);
    Vector b = oracle::random_vector(gen, n, -5, 5);
    Vector x = solve(factorize(A), b);
    double res = (A.apply(x) - b).norm() / std::max(b.norm(), 1.0);
    CHECK(res <= 1e-10);
  }
}

TEST_CASE("identical inputs give bitwise identical solves") {
  auto build = [] {
    std::vector<Triplet> trips = {{0, 0, 4.0}, {0, 1, -1.0}, {1, 0, -1.0}, {1, 1, 3.7},
                                  {1, 2, 0.5}, {2, 1, 0.5},  {2, 2, 5.0}};
    return assemble(3, 3, trips);
  };
  Vector b(3);
  b << 1, -2, 0.25;
  Vector x1 = solve(factorize(build()), b);
  Vector x2 = solve(factorize(build()), b);
  for (int i = 0; i < 3; ++i) CHECK(x1[i] == x2[i]);
}

TEST_CASE("singular matrix is reported") {
  SparseMatrix S = assemble(2, 2, {{0, 0, 1.0}, {1, 0, 1.0}});  // column 1 empty
  CHECK_THROWS_AS(factorize(S), std::runtime_error);
}

TEST_CASE("solve rejects dimension mismatch") {
  SparseMatrix I = assemble(2, 2, {{0, 0, 1}, {1, 1, 1}});
  Factorization F = factorize(I);
  CHECK_THROWS_AS(F.solve(Vector::Ones(3)), std::invalid_argument);
  CHECK_THROWS_AS(factorize(assemble(2, 3, {})), std::invalid_argument);
}

TEST_SUITE_END();
