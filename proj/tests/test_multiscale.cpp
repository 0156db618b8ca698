#include <doctest.h>

#include <cmath>

#include "ehlod/multiscale.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace ehlod;
using testutil::energy_norm;

namespace {

struct Setup {
  CartesianMesh cm;
  FineSpace fine;
  CoefficientField A;
  CoarseSpace coarse;
  SparseMatrix K_fine;
  SparseMatrix M_fine;

  Setup(int dim, int nH, int nf, int p, std::uint64_t seed, int eps_n = 0)
      : cm(build_mesh(dim, nH)),
        fine(make_fine_space(build_mesh(dim, nf))),
        A(eps_n > 0
              ? sample_coefficient(CoefficientKind::random_uniform, dim, eps_n, 0.1, 1.0, seed)
              : constant_coefficient(dim, 1.0)),
        coarse(cm, p),
        K_fine(assemble_stiffness(fine, A)),
        M_fine(assemble_mass(fine)) {}
};

}  // namespace

TEST_SUITE_BEGIN("multiscale");

TEST_CASE("solve_saddle zero data gives zero") {
  Setup s(1, 2, 8, 0, 1);
  SparseMatrix C = constraint_matrix_full(s.coarse, s.fine);
  auto res = solve_saddle(s.K_fine, C, Vector::Zero(s.fine.dof()), Vector::Zero(C.rows()));
  CHECK(res.x.norm() == 0.0);
  CHECK(res.lambda.norm() == 0.0);
}

TEST_CASE("solve_saddle matches a dense KKT oracle") {
  Setup s(1, 2, 8, 0, 1);
  SparseMatrix C = constraint_matrix_full(s.coarse, s.fine);
  index_t na = s.fine.dof(), nc = C.rows();
  Vector c = Vector::Zero(nc);
  c[0] = 1.0;
  auto res = solve_saddle(s.K_fine, C, Vector::Zero(na), c);

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(na + nc, na + nc);
  kkt.topLeftCorner(na, na) = oracle::dense(s.K_fine);
  kkt.topRightCorner(na, nc) = oracle::dense(C).transpose();
  kkt.bottomLeftCorner(nc, na) = oracle::dense(C);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(na + nc);
  rhs.tail(nc) = c;
  Eigen::VectorXd ref = oracle::gauss_solve(kkt, rhs);
  CHECK((res.x - ref.head(na)).lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK((res.lambda - ref.tail(nc)).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("solve_saddle is linear and satisfies the block residuals") {
  Setup s(1, 4, 32, 1, 3, 8);
  SparseMatrix C = constraint_matrix_full(s.coarse, s.fine);
  auto gen = oracle::rng(21);
  Vector b = oracle::random_vector(gen, s.fine.dof());
  Vector c = oracle::random_vector(gen, C.rows());
  auto r1 = solve_saddle(s.K_fine, C, b, c);
  double res1 = (s.K_fine.apply(r1.x) + C.transposed().apply(r1.lambda) - b).norm() /
                std::max(1.0, b.norm());
  double res2 = (C.apply(r1.x) - c).norm() / std::max(1.0, c.norm());
  CHECK(res1 <= 1e-10);
  CHECK(res2 <= 1e-10);

  auto r2 = solve_saddle(s.K_fine, C, Vector(2.0 * b), Vector::Zero(C.rows()));
  auto r05 = solve_saddle(s.K_fine, C, b, Vector::Zero(C.rows()));
  CHECK((r2.x - 2.0 * r05.x).lpNorm<Eigen::Infinity>() <=
        1e-12 * std::max(1.0, r2.x.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("rank-deficient constraints are reported") {
  Setup s(1, 2, 8, 0, 1);
  SparseMatrix C = constraint_matrix_full(s.coarse, s.fine);
  std::vector<Triplet> trips = C.triplets();
  for (const auto& t : C.triplets())
    if (t.row == 0) trips.push_back({C.rows(), t.col, t.value});
  SparseMatrix C2 = assemble(C.rows() + 1, C.cols(), trips);
  CHECK_THROWS(solve_saddle(s.K_fine, C2, Vector::Zero(s.fine.dof()), Vector::Zero(C2.rows())));
}

TEST_CASE("ideal basis satisfies the projection constraint and a-orthogonality") {
  Setup s(1, 8, 128, 1, 7, 16);
  MultiscaleSpace ms = ideal_basis(s.coarse, s.fine, s.A);
  SparseMatrix C = constraint_matrix_full(s.coarse, s.fine);
  REQUIRE(ms.dim() == s.coarse.dim());

  for (index_t col = 0; col < ms.dim(); ++col) {
    Vector proj = C.apply(ms.columns[col].dense(s.fine.dof()));
    Vector e = Vector::Zero(s.coarse.dim());
    e[col] = 1.0;
    CHECK((proj - e).lpNorm<Eigen::Infinity>() <= 1e-10);
  }

  testutil::KernelProjector kernel(s.coarse, s.fine);
  auto gen = oracle::rng(31);
  for (int t = 0; t < 20; ++t) {
    Vector w = kernel(oracle::random_vector(gen, s.fine.dof()));
    for (index_t col : {index_t(0), index_t(7), index_t(15)}) {
      Vector r = ms.columns[col].dense(s.fine.dof());
      double a_rw = r.dot(s.K_fine.apply(w));
      CHECK(std::abs(a_rw) <= 1e-9 * energy_norm(s.K_fine, r) * energy_norm(s.K_fine, w));
    }
  }
}

TEST_CASE("naive localization matches ideal once patches cover the domain") {
  Setup s(1, 4, 64, 1, 9, 16);
  MultiscaleSpace ms_inf = ideal_basis(s.coarse, s.fine, s.A);
  MultiscaleSpace ms_big = localized_naive(s.coarse, s.fine, s.A, 4);
  REQUIRE(ms_big.dim() == ms_inf.dim());
  for (index_t col = 0; col < ms_inf.dim(); ++col) {
    Vector d = ms_inf.columns[col].dense(s.fine.dof()) - ms_big.columns[col].dense(s.fine.dof());
    CHECK(d.lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("localized bases honor their declared supports") {
  Setup s(1, 16, 256, 1, 11, 16);
  for (Strategy st : {Strategy::naive, Strategy::bubble, Strategy::generalized}) {
    for (int ell : {1, 2}) {
      MultiscaleSpace ms = build_multiscale_space(st, s.coarse, s.fine, s.A, ell);
      for (const BasisColumn& bc : ms.columns) {
        Vector dense = bc.dense(s.fine.dof());
        std::vector<char> inside(s.fine.mesh.element_count(), 0);
        for (index_t K : bc.support.elements)
          for (index_t e : fine_elements_in(K, s.cm, s.fine.mesh)) inside[e] = 1;
        double outside_max = 0.0;
        for (index_t f = 0; f < s.fine.dof(); ++f) {
          auto [ix, iy] = s.fine.mesh.node_coords(s.fine.node_of_free[f]);
          bool touched = false;
          for (int jx = ix - 1; jx <= ix && !touched; ++jx)
            if (jx >= 0 && jx < s.fine.mesh.n && inside[jx]) touched = true;
          if (!touched) outside_max = std::max(outside_max, std::abs(dense[f]));
        }
        CHECK(outside_max <= 1e-14);
      }
    }
  }
}

TEST_CASE("naive basis support equals the patch") {
  Setup s(1, 16, 256, 0, 13, 16);
  MultiscaleSpace ms = localized_naive(s.coarse, s.fine, s.A, 2);
  const BasisColumn& bc = ms.columns[s.coarse.func_index(8, 0)];
  CHECK(bc.support.elements == patch(s.cm, {8}, 2).elements);
}

TEST_CASE("bubble and generalized bases satisfy the projection constraint") {
  Setup s(1, 8, 128, 1, 17, 16);
  SparseMatrix C = constraint_matrix_full(s.coarse, s.fine);
  for (Strategy st : {Strategy::bubble, Strategy::generalized}) {
    for (int ell : {2, ell_inf}) {
      MultiscaleSpace ms = build_multiscale_space(st, s.coarse, s.fine, s.A, ell);
      for (index_t col = 0; col < ms.dim(); ++col) {
        Vector proj = C.apply(ms.columns[col].dense(s.fine.dof()));
        Vector e = Vector::Zero(s.coarse.dim());
        e[col] = 1.0;
        CHECK((proj - e).lpNorm<Eigen::Infinity>() <= 1e-10);
      }
    }
  }
}

TEST_CASE("all strategies agree at ell=inf in the elliptic Galerkin sense") {
  for (int p : {0, 1, 2}) {
    Setup s(1, 8, 128, p, 19, 16);
    Vector f = assemble_load(s.fine, [](double x, double) { return x + std::sin(M_PI * x); }, 5);
    SparseMatrix B_ideal = ideal_basis(s.coarse, s.fine, s.A).basis_matrix();
    double unorm = energy_norm(s.K_fine, B_ideal.apply(elliptic_galerkin(B_ideal, s.K_fine, f)));
    for (Strategy st : {Strategy::naive, Strategy::bubble, Strategy::generalized}) {
      SparseMatrix B = build_multiscale_space(st, s.coarse, s.fine, s.A, ell_inf).basis_matrix();
      double diff = testutil::elliptic_agreement(B_ideal, B, s.K_fine, f);
      CHECK(diff <= 1e-9 * std::max(1.0, unorm));
    }
  }
}

TEST_CASE("2d strategies agree at ell=inf") {
  Setup s(2, 3, 12, 1, 23, 6);
  Vector f = assemble_load(
      s.fine, [](double x, double y) { return std::sin(M_PI * x) * std::sin(M_PI * y); }, 4);
  SparseMatrix B_ideal = ideal_basis(s.coarse, s.fine, s.A).basis_matrix();
  double unorm = energy_norm(s.K_fine, B_ideal.apply(elliptic_galerkin(B_ideal, s.K_fine, f)));
  for (Strategy st : {Strategy::naive, Strategy::bubble, Strategy::generalized}) {
    SparseMatrix B = build_multiscale_space(st, s.coarse, s.fine, s.A, ell_inf).basis_matrix();
    CHECK(testutil::elliptic_agreement(B_ideal, B, s.K_fine, f) <= 1e-9 * std::max(1.0, unorm));
  }
}

TEST_CASE("2d localized strategies keep the projection constraint") {
  Setup s(2, 4, 16, 1, 37, 8);
  SparseMatrix C = constraint_matrix_full(s.coarse, s.fine);
  for (Strategy st : {Strategy::naive, Strategy::bubble, Strategy::generalized}) {
    MultiscaleSpace ms = build_multiscale_space(st, s.coarse, s.fine, s.A, 1);
    for (index_t col = 0; col < ms.dim(); ++col) {
      Vector proj = C.apply(ms.columns[col].dense(s.fine.dof()));
      Vector e = Vector::Zero(s.coarse.dim());
      e[col] = 1.0;
      CHECK((proj - e).lpNorm<Eigen::Infinity>() <= 1e-10);
    }
  }
}

TEST_CASE("galerkin_reduce") {
  Setup s(1, 4, 32, 1, 29, 8);

  SUBCASE("identity injection reproduces the fine matrices") {
    std::vector<Triplet> trips;
    for (index_t i = 0; i < s.fine.dof(); ++i) trips.push_back({i, i, 1.0});
    SparseMatrix B = assemble(s.fine.dof(), s.fine.dof(), trips);
    auto [K_red, M_red] = galerkin_reduce(B, s.K_fine, s.M_fine);
    for (const auto& t : s.K_fine.triplets())
      CHECK(K_red.coeff(t.row, t.col) == doctest::Approx(t.value).epsilon(1e-14));
    for (const auto& t : s.M_fine.triplets())
      CHECK(M_red.coeff(t.row, t.col) == doctest::Approx(t.value).epsilon(1e-14));
  }

  SUBCASE("symmetry and congruence oracle") {
    MultiscaleSpace ms = localized_naive(s.coarse, s.fine, s.A, 1);
    SparseMatrix B = ms.basis_matrix();
    auto [K_red, M_red] = galerkin_reduce(B, s.K_fine, s.M_fine);
    CHECK(K_red.symmetric_within(1e-12));
    CHECK(M_red.symmetric_within(1e-12));
    Eigen::MatrixXd Bd = oracle::dense(B);
    Eigen::MatrixXd Kd = Bd.transpose() * oracle::dense(s.K_fine) * Bd;
    CHECK((oracle::dense(K_red) - Kd).lpNorm<Eigen::Infinity>() <= 1e-12 * Kd.norm());
  }

  SUBCASE("rank-deficient basis is rejected") {
    std::vector<Triplet> trips;
    for (index_t i = 0; i < s.fine.dof(); ++i) {
      trips.push_back({i, 0, 1.0});
      trips.push_back({i, 1, 1.0});
    }
    SparseMatrix B = assemble(s.fine.dof(), 2, trips);
    CHECK_THROWS_AS(galerkin_reduce(B, s.K_fine, s.M_fine), std::runtime_error);
  }
}

TEST_CASE("elliptic Galerkin error converges at higher order") {
  FineSpace fine = make_fine_space(build_mesh(1, 1024));
  CoefficientField A = sample_coefficient(CoefficientKind::random_uniform, 1, 64, 0.1, 1.0, 101);
  SparseMatrix K_fine = assemble_stiffness(fine, A);
  Vector f = assemble_load(fine, [](double x, double) { return x + std::sin(M_PI * x); }, 6);
  Vector u_fine = solve(factorize(K_fine), f);
  double unorm = energy_norm(K_fine, u_fine);

  for (int p : {1, 2, 3}) {
    std::vector<double> Hs, errs;
    for (int nH : {4, 8, 16, 32, 64}) {
      CoarseSpace coarse(build_mesh(1, nH), p);
      SparseMatrix B = ideal_basis(coarse, fine, A).basis_matrix();
      Vector u_ms = B.apply(elliptic_galerkin(B, K_fine, f));
      double err = energy_norm(K_fine, u_ms - u_fine);
      if (err <= 1e-9 * unorm) break;  // solver noise floor
      Hs.push_back(1.0 / nH);
      errs.push_back(err);
    }
    REQUIRE(Hs.size() >= 3);
    double eoc = ls_eoc(Hs, errs);
    CHECK(eoc >= p + 1.8);
  }
}

TEST_SUITE_END();
