#include "ehlod/enrichment.hpp"

#include <memory>
#include <stdexcept>

#include "ehlod/parallel.hpp"

namespace ehlod {

SparseMatrix EnrichedSpace::combined_basis() const {
  std::vector<Triplet> trips;
  index_t ncols = total_columns();
  index_t fine_dof = base.fine_dof;
  auto add_column = [&](index_t col, const BasisColumn& bc) {
    if (bc.rows.empty() && bc.values.size() == fine_dof) {
      for (index_t r = 0; r < fine_dof; ++r)
        if (bc.values[r] != 0.0) trips.push_back({r, col, bc.values[r]});
    } else {
      for (std::size_t k = 0; k < bc.rows.size(); ++k)
        if (bc.values[k] != 0.0) trips.push_back({bc.rows[k], col, bc.values[k]});
    }
  };
  for (index_t c = 0; c < base.dim(); ++c) add_column(c, base.columns[c]);
  for (std::size_t k = 0; k < corrections.size(); ++k)
    add_column(base.dim() + static_cast<index_t>(k), corrections[k]);
  return assemble(fine_dof, ncols, trips);
}

namespace {

struct KernelPatchSystem {
  PatchSpace ps;
  std::unique_ptr<SaddleOperator> op;
};

KernelPatchSystem make_kernel_system(const CoarseSpace& coarse, const FineSpace& fine,
                                     const SparseMatrix& A_fine, const SparseMatrix& C_full,
                                     const Patch& p) {
  KernelPatchSystem sys;
  sys.ps = make_patch_space(p, coarse.mesh(), fine);
  SparseMatrix A_p = restrict_to_patch(A_fine, sys.ps);
  std::vector<index_t> rows;
  rows.reserve(p.elements.size() * coarse.funcs_per_element());
  for (index_t K : p.elements)
    for (int j = 0; j < coarse.funcs_per_element(); ++j) rows.push_back(coarse.func_index(K, j));
  SparseMatrix C_p = select(C_full, rows, sys.ps.local_of_free, sys.ps.dof());
  sys.op = std::make_unique<SaddleOperator>(A_p, C_p);
  return sys;
}

Vector apply_correction(const KernelPatchSystem& sys, const SparseMatrix& M_fine,
                        const Vector& v_global, index_t fine_dof) {
  Vector b = -restrict_vector(sys.ps, M_fine.apply(v_global));
  Vector x = sys.op->solve(b, Vector::Zero(sys.op->multiplier_dim())).x;
  Vector out = Vector::Zero(fine_dof);
  scatter_add(sys.ps, x, out);
  return out;
}

}  // namespace

Vector enrich_once(const CoarseSpace& coarse, const FineSpace& fine, const CoefficientField& A,
                   index_t K, int ell, const Vector& v_global) {
  if (v_global.size() != fine.dof()) throw std::invalid_argument("fine vector of wrong size");
  SparseMatrix A_fine = assemble_stiffness(fine, A);
  SparseMatrix C_full = constraint_matrix_full(coarse, fine);
  SparseMatrix M_fine = assemble_mass(fine);
  KernelPatchSystem sys =
      make_kernel_system(coarse, fine, A_fine, C_full, patch(coarse.mesh(), {K}, ell));
  return apply_correction(sys, M_fine, v_global, fine.dof());
}

EnrichedSpace build_enriched_space(const MultiscaleSpace& base, int j, const CoefficientField& A,
                                   int threads) {
  if (j < 0) throw std::invalid_argument("enrichment level must be nonnegative");
  EnrichedSpace es;
  es.base = base;
  es.level = j;
  if (j == 0) return es;

  CoarseSpace coarse(base.coarse_mesh, base.p);
  FineSpace fine = make_fine_space(base.fine_mesh);
  SparseMatrix A_fine = assemble_stiffness(fine, A);
  SparseMatrix C_full = constraint_matrix_full(coarse, fine);
  SparseMatrix M_fine = assemble_mass(fine);
  const CartesianMesh& cm = base.coarse_mesh;
  int M = coarse.funcs_per_element();

  es.corrections.resize(static_cast<std::size_t>(j) * base.dim());

  bool all_cover = (base.ell == ell_inf) || (base.ell >= cm.n - 1);
  std::unique_ptr<KernelPatchSystem> shared;
  if (all_cover)
    shared = std::make_unique<KernelPatchSystem>(
        make_kernel_system(coarse, fine, A_fine, C_full, patch(cm, {0}, ell_inf)));

  parallel_for(cm.element_count(), all_cover ? 1 : threads, [&](index_t K) {
    KernelPatchSystem own;
    if (!all_cover)
      own = make_kernel_system(coarse, fine, A_fine, C_full, patch(cm, {K}, base.ell));
    const KernelPatchSystem& sys = all_cover ? *shared : own;
    for (int i = 0; i < M; ++i) {
      Vector v = base.columns[coarse.func_index(K, i)].dense(base.fine_dof);
      for (int nu = 1; nu <= j; ++nu) {
        v = apply_correction(sys, M_fine, v, base.fine_dof);
        BasisColumn bc;
        bc.K = K;
        bc.i = i;
        bc.nu = nu;
        bc.support = sys.ps.patch;
        if (sys.ps.dof() == base.fine_dof) {
          bc.values = v;
        } else {
          bc.rows = sys.ps.free_nodes;
          bc.values = restrict_vector(sys.ps, v);
        }
        es.corrections[static_cast<std::size_t>(nu - 1) * base.dim() + coarse.func_index(K, i)] =
            std::move(bc);
      }
    }
  });
  return es;
}

std::pair<Vector, Vector> q_expansion_initial(const Vector& u0, const Vector& v0,
                                              const EnrichedSpace& es) {
  if (u0.size() != es.base.fine_dof || v0.size() != es.base.fine_dof)
    throw std::invalid_argument("initial data must live on the fine space");
  if (u0.lpNorm<Eigen::Infinity>() != 0.0 || v0.lpNorm<Eigen::Infinity>() != 0.0)
    throw std::invalid_argument(
        "nonzero initial data is unsupported: it needs the well-preparedness compatibility "
        "recursion, which is not implemented; use zero initial conditions");
  return {Vector::Zero(es.total_columns()), Vector::Zero(es.total_columns())};
}

}  // namespace ehlod
