#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ehlod/mesh.hpp"
#include "ehlod/sparse.hpp"

namespace ehlod {

enum class CoefficientKind { random_uniform };

// Piecewise-constant scalar coefficient on the eps-scale mesh.
struct CoefficientField {
  CartesianMesh eps_mesh;
  std::vector<double> values;  // per eps-element, lexicographic
  double alpha = 0.0;          // lower bound
  double beta = 0.0;           // upper bound

  double value_on_fine_element(const CartesianMesh& fine, index_t e) const;

  void save(std::ostream& os) const;
  void save_file(const std::string& path) const;
  static CoefficientField load(std::istream& is);
  static CoefficientField load_file(const std::string& path);
};

CoefficientField sample_coefficient(CoefficientKind kind, int dim, int eps_n, double lo, double hi,
                                    std::uint64_t seed);
CoefficientField constant_coefficient(int dim, double value);

// Conforming P1/Q1 space on the fine mesh with homogeneous Dirichlet
// conditions; boundary nodes carry no degree of freedom.
struct FineSpace {
  CartesianMesh mesh;
  std::vector<index_t> node_of_free;
  std::vector<index_t> free_of_node;  // -1 on the boundary

  index_t dof() const { return static_cast<index_t>(node_of_free.size()); }
};

FineSpace make_fine_space(const CartesianMesh& mesh);

// Fine degrees of freedom interior to a coarse-element patch.
struct PatchSpace {
  Patch patch;
  std::vector<index_t> fine_elements;  // sorted fine element indices
  std::vector<index_t> free_nodes;     // global free indices, sorted
  std::vector<index_t> local_of_free;  // global free -> local, -1 outside

  index_t dof() const { return static_cast<index_t>(free_nodes.size()); }
};

PatchSpace make_patch_space(const Patch& p, const CartesianMesh& coarse, const FineSpace& fine);

SparseMatrix assemble_stiffness(const FineSpace& space, const CoefficientField& A);
SparseMatrix assemble_mass(const FineSpace& space);
// Mass matrix over all nodes, boundary included.
SparseMatrix assemble_mass_full(const CartesianMesh& mesh);
Vector assemble_load(const FineSpace& space, const std::function<double(double, double)>& g,
                     int quad_pts);

// Principal submatrix on the patch-interior free nodes.
SparseMatrix restrict_to_patch(const SparseMatrix& M, const PatchSpace& ps);

Vector restrict_vector(const PatchSpace& ps, const Vector& global);
void scatter_add(const PatchSpace& ps, const Vector& local, Vector& global);

// y_i = sum over the given fine elements of the element stiffness action;
// equals a(v, phi_i) with the integral restricted to those elements.
Vector apply_stiffness_on_elements(const FineSpace& space, const CoefficientField& A,
                                   const std::vector<index_t>& fine_elements, const Vector& v);

// Unweighted gradient seminorm squared of v over the fine elements selected
// by the mask (1 = include).
double gradient_seminorm_sq(const FineSpace& space, const Vector& v,
                            const std::vector<char>& element_mask);

// L2 norm squared of a fine function restricted to one coarse element.
double l2_norm_sq_on_coarse_element(const FineSpace& space, const CartesianMesh& coarse,
                                    index_t K, const Vector& v);

}  // namespace ehlod
