#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace ehlod {

using index_t = std::int64_t;

// Localization parameter sentinel: patches cover the whole mesh.
inline constexpr int ell_inf = -1;

// Uniform Cartesian mesh on the unit box [0,1]^dim with n cells per
// direction. Elements and nodes are indexed lexicographically, x fastest.
struct CartesianMesh {
  int dim = 1;
  int n = 1;

  double h() const { return 1.0 / static_cast<double>(n); }

  index_t element_count() const;
  index_t node_count() const;

  std::array<int, 2> element_coords(index_t e) const;
  index_t element_index(int ix, int iy = 0) const;
  std::array<int, 2> node_coords(index_t v) const;
  index_t node_index(int ix, int iy = 0) const;

  int vertices_per_element() const { return dim == 1 ? 2 : 4; }
  // Vertices of element e in lexicographic order; only the first
  // vertices_per_element() entries are valid.
  std::array<index_t, 4> element_vertices(index_t e) const;

  bool node_on_boundary(index_t v) const;
};

CartesianMesh build_mesh(int dim, int n);

// Ratio r = fine.n / coarse.n of two aligned meshes.
int refine_ratio(const CartesianMesh& coarse, const CartesianMesh& fine);

// Element patch N^ell(S) obtained by applying the closure-intersection
// neighborhood recursion ell times to the center set S.
struct Patch {
  std::vector<index_t> centers;   // S, sorted
  int layers = 0;                 // ell (ell_inf for full-domain patches)
  std::vector<index_t> elements;  // N^ell(S), sorted

  bool contains(index_t e) const;
  bool covers_mesh(const CartesianMesh& mesh) const;
};

Patch patch(const CartesianMesh& mesh, const std::vector<index_t>& S, int ell);

// The r^dim fine elements covering one coarse element.
std::vector<index_t> fine_elements_in(index_t coarse_elem,
                                      const CartesianMesh& coarse,
                                      const CartesianMesh& fine);

}  // namespace ehlod
