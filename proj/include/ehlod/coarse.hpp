#pragma once

#include <vector>

#include "ehlod/fem.hpp"
#include "ehlod/mesh.hpp"
#include "ehlod/sparse.hpp"

namespace ehlod {

// Discontinuous Q_p space on the coarse mesh. The per-element basis consists
// of tensor-product Legendre polynomials mapped to the element and
// L2(K)-orthonormalized, M = (p+1)^dim functions per element, index i
// lexicographic in the per-direction degrees (x fastest).
class CoarseSpace {
 public:
  CoarseSpace(const CartesianMesh& mesh, int degree);

  const CartesianMesh& mesh() const { return mesh_; }
  int degree() const { return p_; }
  int funcs_per_element() const { return M_; }
  index_t dim() const { return mesh_.element_count() * M_; }
  index_t func_index(index_t K, int i) const { return K * M_ + i; }

  double eval(index_t K, int i, double x, double y = 0.0) const;

 private:
  CartesianMesh mesh_;
  int p_;
  int M_;
};

// Inner products (phi_i, Lambda_{K,j}) between the fine hat functions and the
// coarse basis; rows indexed by func_index, columns by fine free nodes.
SparseMatrix constraint_matrix_full(const CoarseSpace& coarse, const FineSpace& fine);

// Patch-local constraint block: rows are the coarse functions of the patch
// elements (in sorted element order), columns the patch-interior free nodes.
SparseMatrix constraint_matrix(const CoarseSpace& coarse, const FineSpace& fine,
                               const PatchSpace& ps);

// Element-local L2 projection of a fine function; returns the coefficient
// vector in the orthonormal basis, length coarse.dim().
Vector project_PiH(const CoarseSpace& coarse, const FineSpace& fine, const Vector& v);

// Coefficients of Pi_H v on a single element (length M).
Vector project_on_element(const CoarseSpace& coarse, const FineSpace& fine, index_t K,
                          const Vector& v);

// Pointwise evaluation of the coarse expansion (for tests).
double eval_coarse(const CoarseSpace& coarse, const Vector& coeffs, double x, double y = 0.0);

// Element means of a fine function per coarse element.
std::vector<double> coarse_element_means(const FineSpace& fine, const CartesianMesh& coarse_mesh,
                                         const Vector& v);

// Averaging part of the quasi-interpolation: node value = volume-weighted
// average of the adjacent element means, zero on the boundary.
std::vector<double> average_means_to_nodes(const CartesianMesh& coarse_mesh,
                                           const std::vector<double>& means);

// Fine-space interpolant of the continuous piecewise (multi-)linear coarse
// function with the given nodal values.
Vector q1_interpolant(const FineSpace& fine, const CartesianMesh& coarse_mesh,
                      const std::vector<double>& node_values);

// I_H = E o Pi^0, returned as its fine-space interpolant.
Vector quasi_interpolate_IH(const FineSpace& fine, const CartesianMesh& coarse_mesh,
                            const Vector& v);

// c_K(v, .) = (v - I_H v, Lambda_{K,j})_{L2(K)} for the element's basis.
Vector c_form(const CoarseSpace& coarse, const FineSpace& fine, const Vector& v, index_t K);

}  // namespace ehlod
