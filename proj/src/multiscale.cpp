#include "ehlod/multiscale.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <stdexcept>

#include "ehlod/parallel.hpp"

namespace ehlod {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::ideal: return "ideal";
    case Strategy::naive: return "naive";
    case Strategy::bubble: return "bubble";
    case Strategy::generalized: return "generalized";
  }
  return "?";
}

Strategy strategy_from_string(const std::string& name) {
  if (name == "ideal") return Strategy::ideal;
  if (name == "naive") return Strategy::naive;
  if (name == "bubble") return Strategy::bubble;
  if (name == "generalized") return Strategy::generalized;
  throw std::invalid_argument("unknown strategy '" + name + "'");
}

namespace {

SparseMatrix saddle_matrix(const SparseMatrix& A, const SparseMatrix& C) {
  if (A.rows() != A.cols()) throw std::invalid_argument("stiffness block must be square");
  if (C.cols() != A.rows())
    throw std::invalid_argument("constraint block has " + std::to_string(C.cols()) +
                                " columns, expected " + std::to_string(A.rows()));
  index_t na = A.rows(), nc = C.rows();
  std::vector<Triplet> trips;
  trips.reserve(A.nnz() + 2 * C.nnz());
  for (const auto& t : A.triplets()) trips.push_back(t);
  for (const auto& t : C.triplets()) {
    trips.push_back({na + t.row, t.col, t.value});
    trips.push_back({t.col, na + t.row, t.value});
  }
  return assemble(na + nc, na + nc, trips);
}

}  // namespace

SaddleOperator::SaddleOperator(const SparseMatrix& A, const SparseMatrix& C)
    : fac_(saddle_matrix(A, C)), na_(A.rows()), nc_(C.rows()) {}

SaddleSolveResult SaddleOperator::solve(const Vector& b, const Vector& c) const {
  if (b.size() != na_ || c.size() != nc_)
    throw std::invalid_argument("saddle right-hand side dimension mismatch");
  Vector rhs(na_ + nc_);
  rhs.head(na_) = b;
  rhs.tail(nc_) = c;
  Vector y = fac_.solve(rhs);
  return {y.head(na_), y.tail(nc_)};
}

SaddleSolveResult solve_saddle(const SparseMatrix& A, const SparseMatrix& C, const Vector& b,
                               const Vector& c) {
  return SaddleOperator(A, C).solve(b, c);
}

Vector BasisColumn::dense(index_t fine_dof) const {
  Vector out = Vector::Zero(fine_dof);
  if (rows.empty() && values.size() == fine_dof) {
    out = values;  // full-support column stored densely
  } else {
    for (std::size_t k = 0; k < rows.size(); ++k) out[rows[k]] += values[k];
  }
  return out;
}

SparseMatrix MultiscaleSpace::basis_matrix() const {
  std::vector<Triplet> trips;
  for (index_t col = 0; col < dim(); ++col) {
    const BasisColumn& bc = columns[col];
    if (bc.rows.empty() && bc.values.size() == fine_dof) {
      for (index_t r = 0; r < fine_dof; ++r)
        if (bc.values[r] != 0.0) trips.push_back({r, col, bc.values[r]});
    } else {
      for (std::size_t k = 0; k < bc.rows.size(); ++k)
        if (bc.values[k] != 0.0) trips.push_back({bc.rows[k], col, bc.values[k]});
    }
  }
  return assemble(fine_dof, dim(), trips);
}

namespace {

struct PatchSystem {
  PatchSpace ps;
  std::unique_ptr<SaddleOperator> op;

  index_t row_of(const CoarseSpace& coarse, index_t K, int i) const {
    auto it = std::lower_bound(ps.patch.elements.begin(), ps.patch.elements.end(), K);
    if (it == ps.patch.elements.end() || *it != K)
      throw std::logic_error("element not in patch");
    index_t pos = it - ps.patch.elements.begin();
    return pos * coarse.funcs_per_element() + i;
  }
};

std::vector<index_t> patch_constraint_rows(const CoarseSpace& coarse, const Patch& p) {
  std::vector<index_t> rows;
  rows.reserve(p.elements.size() * coarse.funcs_per_element());
  for (index_t K : p.elements)
    for (int j = 0; j < coarse.funcs_per_element(); ++j) rows.push_back(coarse.func_index(K, j));
  return rows;
}

PatchSystem make_patch_system(const CoarseSpace& coarse, const FineSpace& fine,
                              const SparseMatrix& A_fine, const SparseMatrix& C_full,
                              const Patch& p) {
  PatchSystem sys;
  sys.ps = make_patch_space(p, coarse.mesh(), fine);
  SparseMatrix A_p = restrict_to_patch(A_fine, sys.ps);
  SparseMatrix C_p =
      select(C_full, patch_constraint_rows(coarse, p), sys.ps.local_of_free, sys.ps.dof());
  sys.op = std::make_unique<SaddleOperator>(A_p, C_p);
  return sys;
}

struct BuildContext {
  const CoarseSpace& coarse;
  const FineSpace& fine;
  const CoefficientField& field;
  SparseMatrix A_fine;
  SparseMatrix C_full;

  BuildContext(const CoarseSpace& c, const FineSpace& f, const CoefficientField& a)
      : coarse(c), fine(f), field(a) {
    int r = refine_ratio(c.mesh(), f.mesh);
    if (r < c.degree() + 1)
      throw std::invalid_argument("fine resolution per coarse element below p+1");
    A_fine = assemble_stiffness(f, a);
    C_full = constraint_matrix_full(c, f);
  }
};

MultiscaleSpace init_space(Strategy s, int ell, const BuildContext& ctx) {
  MultiscaleSpace ms;
  ms.strategy = s;
  ms.ell = ell;
  ms.coarse_mesh = ctx.coarse.mesh();
  ms.fine_mesh = ctx.fine.mesh;
  ms.p = ctx.coarse.degree();
  ms.fine_dof = ctx.fine.dof();
  ms.columns.resize(ctx.coarse.dim());
  return ms;
}

BasisColumn column_from_patch(index_t K, int i, const PatchSpace& ps, const Vector& local,
                              index_t fine_dof) {
  BasisColumn bc;
  bc.K = K;
  bc.i = i;
  bc.support = ps.patch;
  if (ps.dof() == fine_dof) {
    bc.values = local;  // dense convention
  } else {
    bc.rows = ps.free_nodes;
    bc.values = local;
  }
  return bc;
}

int check_ell(int ell) {
  if (ell != ell_inf && ell < 1)
    throw std::invalid_argument("localization parameter must be >= 1 (or inf)");
  return ell;
}

}  // namespace

MultiscaleSpace ideal_basis(const CoarseSpace& coarse, const FineSpace& fine,
                            const CoefficientField& A, int threads) {
  (void)threads;  // one shared factorization; the solves stay serial
  BuildContext ctx(coarse, fine, A);
  MultiscaleSpace ms = init_space(Strategy::ideal, ell_inf, ctx);
  Patch full = patch(coarse.mesh(), {0}, ell_inf);
  PatchSystem sys = make_patch_system(coarse, fine, ctx.A_fine, ctx.C_full, full);
  Vector b = Vector::Zero(sys.ps.dof());
  for (index_t K = 0; K < coarse.mesh().element_count(); ++K) {
    for (int i = 0; i < coarse.funcs_per_element(); ++i) {
      Vector c = Vector::Zero(sys.op->multiplier_dim());
      c[sys.row_of(coarse, K, i)] = 1.0;
      SaddleSolveResult res = sys.op->solve(b, c);
      ms.columns[coarse.func_index(K, i)] =
          column_from_patch(K, i, sys.ps, res.x, ms.fine_dof);
    }
  }
  return ms;
}

MultiscaleSpace localized_naive(const CoarseSpace& coarse, const FineSpace& fine,
                                const CoefficientField& A, int ell, int threads) {
  check_ell(ell);
  BuildContext ctx(coarse, fine, A);
  MultiscaleSpace ms = init_space(Strategy::naive, ell, ctx);
  const CartesianMesh& cm = coarse.mesh();

  bool all_cover = (ell == ell_inf) || (ell >= cm.n - 1);
  if (all_cover) {
    Patch full = patch(cm, {0}, ell_inf);
    PatchSystem sys = make_patch_system(coarse, fine, ctx.A_fine, ctx.C_full, full);
    Vector b = Vector::Zero(sys.ps.dof());
    for (index_t K = 0; K < cm.element_count(); ++K)
      for (int i = 0; i < coarse.funcs_per_element(); ++i) {
        Vector c = Vector::Zero(sys.op->multiplier_dim());
        c[sys.row_of(coarse, K, i)] = 1.0;
        ms.columns[coarse.func_index(K, i)] =
            column_from_patch(K, i, sys.ps, sys.op->solve(b, c).x, ms.fine_dof);
      }
    return ms;
  }

  parallel_for(cm.element_count(), threads, [&](index_t K) {
    Patch p = patch(cm, {K}, ell);
    PatchSystem sys = make_patch_system(coarse, fine, ctx.A_fine, ctx.C_full, p);
    Vector b = Vector::Zero(sys.ps.dof());
    for (int i = 0; i < coarse.funcs_per_element(); ++i) {
      Vector c = Vector::Zero(sys.op->multiplier_dim());
      c[sys.row_of(coarse, K, i)] = 1.0;
      ms.columns[coarse.func_index(K, i)] =
          column_from_patch(K, i, sys.ps, sys.op->solve(b, c).x, ms.fine_dof);
    }
  });
  return ms;
}

MultiscaleSpace bubble_basis(const CoarseSpace& coarse, const FineSpace& fine,
                             const CoefficientField& A, int ell, int threads) {
  check_ell(ell);
  BuildContext ctx(coarse, fine, A);
  MultiscaleSpace ms = init_space(Strategy::bubble, ell, ctx);
  const CartesianMesh& cm = coarse.mesh();

  bool all_cover = (ell == ell_inf) || (ell >= cm.n - 1);
  std::unique_ptr<PatchSystem> shared;
  if (all_cover) {
    Patch full = patch(cm, {0}, ell_inf);
    shared = std::make_unique<PatchSystem>(
        make_patch_system(coarse, fine, ctx.A_fine, ctx.C_full, full));
  }

  parallel_for(cm.element_count(), all_cover ? 1 : threads, [&](index_t K) {
    Patch p = all_cover ? patch(cm, {0}, ell_inf) : patch(cm, {K}, ell);
    PatchSystem own;
    const PatchSystem& sys =
        all_cover ? *shared
                  : (own = make_patch_system(coarse, fine, ctx.A_fine, ctx.C_full, p), own);

    // Extended bubble: minimal-energy function on N^1(K) with Pi_H Phi = Lambda_{K,0}.
    Patch p1 = patch(cm, {K}, 1);
    PatchSystem sys1 = make_patch_system(coarse, fine, ctx.A_fine, ctx.C_full, p1);
    Vector c1 = Vector::Zero(sys1.op->multiplier_dim());
    c1[sys1.row_of(coarse, K, 0)] = 1.0;
    Vector phi_local = sys1.op->solve(Vector::Zero(sys1.ps.dof()), c1).x;
    Vector phi = Vector::Zero(ms.fine_dof);
    scatter_add(sys1.ps, phi_local, phi);

    // Corrector in ker Pi_H on N^ell(K): a(C phi, w) = a(phi, w).
    Vector b = restrict_vector(sys.ps, ctx.A_fine.apply(phi));
    Vector x = sys.op->solve(b, Vector::Zero(sys.op->multiplier_dim())).x;
    Vector dense = phi;
    for (index_t l = 0; l < sys.ps.dof(); ++l) dense[sys.ps.free_nodes[l]] -= x[l];
    ms.columns[coarse.func_index(K, 0)] =
        column_from_patch(K, 0, sys.ps, restrict_vector(sys.ps, dense), ms.fine_dof);

    // Higher-order functions as in the plain localized construction.
    for (int i = 1; i < coarse.funcs_per_element(); ++i) {
      Vector c = Vector::Zero(sys.op->multiplier_dim());
      c[sys.row_of(coarse, K, i)] = 1.0;
      ms.columns[coarse.func_index(K, i)] = column_from_patch(
          K, i, sys.ps, sys.op->solve(Vector::Zero(sys.ps.dof()), c).x, ms.fine_dof);
    }
  });
  return ms;
}

MultiscaleSpace localized_generalized(const CoarseSpace& coarse, const FineSpace& fine,
                                      const CoefficientField& A, int ell, int threads) {
  check_ell(ell);
  BuildContext ctx(coarse, fine, A);
  MultiscaleSpace ms = init_space(Strategy::generalized, ell, ctx);
  const CartesianMesh& cm = coarse.mesh();
  int M = coarse.funcs_per_element();
  double vol = std::pow(cm.h(), cm.dim);

  // I_H Lambda_{K,0} for every element; the higher-order basis functions have
  // zero element mean, so their quasi-interpolant vanishes.
  std::vector<Vector> ih(cm.element_count());
  for (index_t K = 0; K < cm.element_count(); ++K) {
    std::vector<double> means(cm.element_count(), 0.0);
    means[K] = 1.0 / std::sqrt(vol);
    ih[K] = q1_interpolant(fine, cm, average_means_to_nodes(cm, means));
  }

  struct Contribution {
    index_t K = -1;  // basis function the solve contributes to
    std::vector<index_t> rows;
    Vector values;
  };
  std::vector<std::vector<Contribution>> contrib(cm.element_count());

  bool all_cover = (ell == ell_inf) || (ell >= cm.n - 1);
  std::unique_ptr<PatchSystem> shared;
  if (all_cover) {
    Patch full = patch(cm, {0}, ell_inf);
    shared = std::make_unique<PatchSystem>(
        make_patch_system(coarse, fine, ctx.A_fine, ctx.C_full, full));
  }

  parallel_for(cm.element_count(), all_cover ? 1 : threads, [&](index_t P) {
    Patch p = all_cover ? patch(cm, {0}, ell_inf) : patch(cm, {P}, ell);
    PatchSystem own;
    const PatchSystem& sys =
        all_cover ? *shared
                  : (own = make_patch_system(coarse, fine, ctx.A_fine, ctx.C_full, p), own);
    std::vector<index_t> fes = fine_elements_in(P, cm, fine.mesh);

    // Element contributions K^[ell]_P applied to the zero-order functions of
    // the neighboring elements (the only ones whose data touches P).
    for (index_t K : patch(cm, {P}, 1).elements) {
      Vector b = restrict_vector(sys.ps, apply_stiffness_on_elements(fine, ctx.field, fes, ih[K]));
      Vector c = Vector::Zero(sys.op->multiplier_dim());
      Vector proj = project_on_element(coarse, fine, P, ih[K]);
      index_t base = sys.row_of(coarse, P, 0);
      for (int j = 0; j < M; ++j)
        c[base + j] = proj[j] - ((K == P && j == 0) ? 1.0 : 0.0);
      Vector x = sys.op->solve(b, c).x;
      contrib[P].push_back({K, sys.ps.free_nodes, x});
    }

    // Higher-order functions: I_H Lambda = 0 reduces them to the plain
    // localized solves.
    for (int i = 1; i < M; ++i) {
      Vector c = Vector::Zero(sys.op->multiplier_dim());
      c[sys.row_of(coarse, P, i)] = 1.0;
      ms.columns[coarse.func_index(P, i)] = column_from_patch(
          P, i, sys.ps, sys.op->solve(Vector::Zero(sys.ps.dof()), c).x, ms.fine_dof);
    }
  });

  // Merge: basis(K,0) = I_H Lambda_{K,0} - sum_P K^[ell]_P Lambda_{K,0}.
  for (index_t K = 0; K < cm.element_count(); ++K) {
    Vector dense = ih[K];
    for (index_t P : patch(cm, {K}, 1).elements)
      for (const Contribution& cb : contrib[P])
        if (cb.K == K)
          for (std::size_t r = 0; r < cb.rows.size(); ++r) dense[cb.rows[r]] -= cb.values[r];
    Patch support = all_cover ? patch(cm, {0}, ell_inf)
                              : patch(cm, patch(cm, {K}, 1).elements, ell);
    PatchSpace pss = make_patch_space(support, cm, fine);
    BasisColumn bc;
    bc.K = K;
    bc.i = 0;
    bc.support = support;
    if (pss.dof() == ms.fine_dof) {
      bc.values = dense;
    } else {
      bc.rows = pss.free_nodes;
      bc.values = restrict_vector(pss, dense);
    }
    ms.columns[coarse.func_index(K, 0)] = std::move(bc);
  }
  return ms;
}

MultiscaleSpace build_multiscale_space(Strategy strategy, const CoarseSpace& coarse,
                                       const FineSpace& fine, const CoefficientField& A, int ell,
                                       int threads) {
  switch (strategy) {
    case Strategy::ideal: return ideal_basis(coarse, fine, A, threads);
    case Strategy::naive: return localized_naive(coarse, fine, A, ell, threads);
    case Strategy::bubble: return bubble_basis(coarse, fine, A, ell, threads);
    case Strategy::generalized: return localized_generalized(coarse, fine, A, ell, threads);
  }
  throw std::logic_error("unreachable");
}

std::pair<SparseMatrix, SparseMatrix> galerkin_reduce(const SparseMatrix& B,
                                                      const SparseMatrix& K_fine,
                                                      const SparseMatrix& M_fine) {
  if (B.cols() == 0) throw std::invalid_argument("basis matrix has no columns");
  if (K_fine.rows() != B.rows() || M_fine.rows() != B.rows())
    throw std::invalid_argument("fine matrices do not match the basis matrix");
  using CM = Eigen::SparseMatrix<double, Eigen::ColMajor, index_t>;
  CM b(B.raw()), k(K_fine.raw()), m(M_fine.raw());
  CM bt = b.transpose();
  auto symmetrize = [](const CM& s) {
    CM st = s.transpose();
    return CM(0.5 * (s + st));
  };
  CM k_red = symmetrize(CM(bt * CM(k * b)));
  CM m_red = symmetrize(CM(bt * CM(m * b)));
  // Basis columns shrink rapidly with the enrichment level, so the Gram
  // matrix is tested after unit-diagonal scaling. Structural rank deficiency
  // (a pivot indistinguishable from zero, or a clearly negative one) is
  // rejected; the high-order configurations legitimately operate with tiny
  // positive pivots near the double-precision floor.
  Eigen::VectorXd diag = m_red.diagonal();
  if (diag.minCoeff() <= 0.0)
    throw std::runtime_error("reduced mass matrix is not positive definite: basis rank-deficient");
  Eigen::VectorXd scale = diag.cwiseSqrt().cwiseInverse();
  CM m_scaled = scale.asDiagonal() * m_red * scale.asDiagonal();
  Eigen::SimplicialLDLT<CM> ldlt(m_scaled);
  double min_pivot = ldlt.info() == Eigen::Success ? ldlt.vectorD().minCoeff() : 0.0;
  if (ldlt.info() != Eigen::Success || min_pivot <= 1e-13)
    throw std::runtime_error(
        "reduced mass matrix is numerically singular (scaled pivot " +
        std::to_string(min_pivot) + "): basis rank-deficient at working precision");
  return {SparseMatrix(SparseMatrix::Storage(k_red)), SparseMatrix(SparseMatrix::Storage(m_red))};
}

}  // namespace ehlod
