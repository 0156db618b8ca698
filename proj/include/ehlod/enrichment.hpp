#pragma once

#include <utility>
#include <vector>

#include "ehlod/multiscale.hpp"

namespace ehlod {

// Base multiscale space plus the level-nu correction vectors
// (D_K)^nu applied to each basis function, all on the unchanged patches.
struct EnrichedSpace {
  MultiscaleSpace base;
  int level = 0;                         // j
  std::vector<BasisColumn> corrections;  // nu-major blocks, each ordered like the base

  index_t total_columns() const { return base.dim() * (level + 1); }
  SparseMatrix combined_basis() const;  // B_j = [B | W^1 | ... | W^j]
};

// One application of the kernel-constrained correction on N^ell(K):
// a(D v, w) = -(v, w) for all patch functions w in ker Pi_H.
Vector enrich_once(const CoarseSpace& coarse, const FineSpace& fine, const CoefficientField& A,
                   index_t K, int ell, const Vector& v_global);

EnrichedSpace build_enriched_space(const MultiscaleSpace& base, int j, const CoefficientField& A,
                                   int threads = 1);

// Coefficients of the initial data in the enriched space. Only zero data is
// supported; anything else needs compatibility corrections that are not built.
std::pair<Vector, Vector> q_expansion_initial(const Vector& u0, const Vector& v0,
                                              const EnrichedSpace& es);

}  // namespace ehlod
