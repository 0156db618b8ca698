// Shared fixtures for the multiscale/enrichment/harness suites.
#pragma once

#include <cmath>
#include <functional>

#include "ehlod/coarse.hpp"
#include "ehlod/experiments.hpp"
#include "ehlod/fem.hpp"
#include "ehlod/multiscale.hpp"
#include "oracles.hpp"

namespace testutil {

using namespace ehlod;

inline Vector interpolate(const FineSpace& s, const std::function<double(double, double)>& f) {
  Vector v(s.dof());
  double h = s.mesh.h();
  for (index_t k = 0; k < s.dof(); ++k) {
    auto [ix, iy] = s.mesh.node_coords(s.node_of_free[k]);
    v[k] = f(ix * h, iy * h);
  }
  return v;
}

inline double energy_norm(const SparseMatrix& K, const Vector& v) {
  return std::sqrt(std::max(v.dot(K.apply(v)), 0.0));
}

// L2-orthogonal projection onto ker Pi_H within the fine space.
struct KernelProjector {
  SparseMatrix C;
  Factorization Mf;
  Eigen::MatrixXd G;  // C M^-1 C^T, dense
  Eigen::MatrixXd Minv_Ct;

  KernelProjector(const CoarseSpace& cs, const FineSpace& s)
      : C(constraint_matrix_full(cs, s)), Mf(factorize(assemble_mass(s))) {
    Eigen::MatrixXd Cd = oracle::dense(C);
    Minv_Ct.resize(s.dof(), C.rows());
    for (index_t r = 0; r < C.rows(); ++r) Minv_Ct.col(r) = Mf.solve(Cd.row(r).transpose());
    G = Cd * Minv_Ct;
  }

  Vector operator()(const Vector& v) const {
    Eigen::VectorXd lam = G.ldlt().solve(C.apply(v));
    return v - Minv_Ct * lam;
  }
};

// Energy-norm distance between the elliptic Galerkin solutions of two spaces.
inline double elliptic_agreement(const SparseMatrix& B1, const SparseMatrix& B2,
                                 const SparseMatrix& K_fine, const Vector& f_fine) {
  Vector u1 = B1.apply(elliptic_galerkin(B1, K_fine, f_fine));
  Vector u2 = B2.apply(elliptic_galerkin(B2, K_fine, f_fine));
  return energy_norm(K_fine, u1 - u2);
}

}  // namespace testutil
