#include "ehlod/mesh.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace ehlod {

index_t CartesianMesh::element_count() const {
  index_t c = n;
  return dim == 1 ? c : c * c;
}

index_t CartesianMesh::node_count() const {
  index_t c = n + 1;
  return dim == 1 ? c : c * c;
}

std::array<int, 2> CartesianMesh::element_coords(index_t e) const {
  if (e < 0 || e >= element_count())
    throw std::invalid_argument("element index " + std::to_string(e) + " out of range");
  if (dim == 1) return {static_cast<int>(e), 0};
  return {static_cast<int>(e % n), static_cast<int>(e / n)};
}

index_t CartesianMesh::element_index(int ix, int iy) const {
  if (ix < 0 || ix >= n || iy < 0 || (dim == 2 && iy >= n) || (dim == 1 && iy != 0))
    throw std::invalid_argument("element coordinates out of range");
  return dim == 1 ? ix : static_cast<index_t>(iy) * n + ix;
}

std::array<int, 2> CartesianMesh::node_coords(index_t v) const {
  if (v < 0 || v >= node_count())
    throw std::invalid_argument("node index " + std::to_string(v) + " out of range");
  index_t m = n + 1;
  if (dim == 1) return {static_cast<int>(v), 0};
  return {static_cast<int>(v % m), static_cast<int>(v / m)};
}

index_t CartesianMesh::node_index(int ix, int iy) const {
  if (ix < 0 || ix > n || iy < 0 || (dim == 2 && iy > n) || (dim == 1 && iy != 0))
    throw std::invalid_argument("node coordinates out of range");
  return dim == 1 ? ix : static_cast<index_t>(iy) * (n + 1) + ix;
}

std::array<index_t, 4> CartesianMesh::element_vertices(index_t e) const {
  auto [ix, iy] = element_coords(e);
  if (dim == 1) return {node_index(ix), node_index(ix + 1), -1, -1};
  return {node_index(ix, iy), node_index(ix + 1, iy), node_index(ix, iy + 1),
          node_index(ix + 1, iy + 1)};
}

bool CartesianMesh::node_on_boundary(index_t v) const {
  auto [ix, iy] = node_coords(v);
  if (dim == 1) return ix == 0 || ix == n;
  return ix == 0 || ix == n || iy == 0 || iy == n;
}

CartesianMesh build_mesh(int dim, int n) {
  if (dim != 1 && dim != 2)
    throw std::invalid_argument("unsupported dimension " + std::to_string(dim));
  if (n < 1) throw std::invalid_argument("mesh needs at least one cell per direction");
  return CartesianMesh{dim, n};
}

int refine_ratio(const CartesianMesh& coarse, const CartesianMesh& fine) {
  if (coarse.dim != fine.dim) throw std::invalid_argument("meshes differ in dimension");
  if (fine.n % coarse.n != 0)
    throw std::invalid_argument("misaligned meshes: " + std::to_string(fine.n) +
                                " not divisible by " + std::to_string(coarse.n));
  return fine.n / coarse.n;
}

bool Patch::contains(index_t e) const {
  return std::binary_search(elements.begin(), elements.end(), e);
}

bool Patch::covers_mesh(const CartesianMesh& mesh) const {
  return static_cast<index_t>(elements.size()) == mesh.element_count();
}

Patch patch(const CartesianMesh& mesh, const std::vector<index_t>& S, int ell) {
  if (S.empty()) throw std::invalid_argument("patch center set is empty");
  for (index_t e : S) mesh.element_coords(e);  // validates
  Patch p;
  p.centers = S;
  std::sort(p.centers.begin(), p.centers.end());
  p.centers.erase(std::unique(p.centers.begin(), p.centers.end()), p.centers.end());
  p.layers = ell;

  if (ell == ell_inf) {
    p.elements.resize(mesh.element_count());
    for (index_t e = 0; e < mesh.element_count(); ++e) p.elements[e] = e;
    return p;
  }
  if (ell < 0) throw std::invalid_argument("negative layer count");

  std::vector<char> in(mesh.element_count(), 0);
  std::vector<index_t> frontier = p.centers;
  for (index_t e : frontier) in[e] = 1;
  for (int layer = 0; layer < ell; ++layer) {
    std::vector<index_t> next;
    for (index_t e : frontier) {
      auto [ix, iy] = mesh.element_coords(e);
      int ylo = mesh.dim == 2 ? -1 : 0;
      int yhi = mesh.dim == 2 ? 1 : 0;
      for (int dy = ylo; dy <= yhi; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          int jx = ix + dx, jy = iy + dy;
          if (jx < 0 || jx >= mesh.n || jy < 0 || (mesh.dim == 2 && jy >= mesh.n)) continue;
          index_t f = mesh.element_index(jx, jy);
          if (!in[f]) {
            in[f] = 1;
            next.push_back(f);
          }
        }
      }
    }
    if (next.empty()) break;
    frontier = std::move(next);
  }
  for (index_t e = 0; e < mesh.element_count(); ++e)
    if (in[e]) p.elements.push_back(e);
  return p;
}

std::vector<index_t> fine_elements_in(index_t coarse_elem, const CartesianMesh& coarse,
                                      const CartesianMesh& fine) {
  int r = refine_ratio(coarse, fine);
  auto [cx, cy] = coarse.element_coords(coarse_elem);
  std::vector<index_t> out;
  if (coarse.dim == 1) {
    out.reserve(r);
    for (int i = 0; i < r; ++i) out.push_back(fine.element_index(cx * r + i));
  } else {
    out.reserve(static_cast<std::size_t>(r) * r);
    for (int j = 0; j < r; ++j)
      for (int i = 0; i < r; ++i) out.push_back(fine.element_index(cx * r + i, cy * r + j));
  }
  return out;
}

}  // namespace ehlod
