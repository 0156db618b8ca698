#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ehlod/coarse.hpp"
#include "ehlod/fem.hpp"
#include "ehlod/mesh.hpp"
#include "ehlod/sparse.hpp"

namespace ehlod {

enum class Strategy { ideal, naive, bubble, generalized };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

struct SaddleSolveResult {
  Vector x;
  Vector lambda;
};

// Monolithic factorization of the symmetric indefinite block system
// [[A, C^T], [C, 0]], reusable for many right-hand sides (b, c).
class SaddleOperator {
 public:
  SaddleOperator(const SparseMatrix& A, const SparseMatrix& C);

  SaddleSolveResult solve(const Vector& b, const Vector& c) const;
  index_t primal_dim() const { return na_; }
  index_t multiplier_dim() const { return nc_; }

 private:
  Factorization fac_;
  index_t na_ = 0;
  index_t nc_ = 0;
};

SaddleSolveResult solve_saddle(const SparseMatrix& A, const SparseMatrix& C, const Vector& b,
                               const Vector& c);

// One multiscale basis vector in global fine coordinates, stored sparse on
// the free nodes of its declared support patch.
struct BasisColumn {
  index_t K = 0;  // owning coarse element
  int i = 0;      // local coarse function index
  int nu = 0;     // enrichment level (0 = base space)
  Patch support;  // declared coarse-element support
  std::vector<index_t> rows;  // global fine free indices
  Vector values;

  Vector dense(index_t fine_dof) const;
};

struct MultiscaleSpace {
  Strategy strategy = Strategy::ideal;
  int ell = ell_inf;
  CartesianMesh coarse_mesh;
  CartesianMesh fine_mesh;
  int p = 0;
  index_t fine_dof = 0;
  std::vector<BasisColumn> columns;  // ordered by func_index(K, i)

  index_t dim() const { return static_cast<index_t>(columns.size()); }
  SparseMatrix basis_matrix() const;
};

MultiscaleSpace ideal_basis(const CoarseSpace& coarse, const FineSpace& fine,
                            const CoefficientField& A, int threads = 1);
MultiscaleSpace localized_naive(const CoarseSpace& coarse, const FineSpace& fine,
                                const CoefficientField& A, int ell, int threads = 1);
MultiscaleSpace bubble_basis(const CoarseSpace& coarse, const FineSpace& fine,
                             const CoefficientField& A, int ell, int threads = 1);
MultiscaleSpace localized_generalized(const CoarseSpace& coarse, const FineSpace& fine,
                                      const CoefficientField& A, int ell, int threads = 1);
MultiscaleSpace build_multiscale_space(Strategy strategy, const CoarseSpace& coarse,
                                       const FineSpace& fine, const CoefficientField& A, int ell,
                                       int threads = 1);

// K_red = B^T K B and M_red = B^T M B; M_red must be positive definite.
std::pair<SparseMatrix, SparseMatrix> galerkin_reduce(const SparseMatrix& B,
                                                      const SparseMatrix& K_fine,
                                                      const SparseMatrix& M_fine);

}  // namespace ehlod
