#include "ehlod/coarse.hpp"

#include <cmath>
#include <stdexcept>

#include "ehlod/quadrature.hpp"

namespace ehlod {

namespace {

// Legendre P_k(t) on [-1,1].
double legendre(int k, double t) {
  if (k == 0) return 1.0;
  double p0 = 1.0, p1 = t;
  for (int m = 2; m <= k; ++m) {
    double p2 = ((2.0 * m - 1.0) * t * p1 - (m - 1.0) * p0) / m;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

// Orthonormal 1D basis on an element of length H at local coordinate
// s in [0,1]: sqrt((2k+1)/H) P_k(2s-1).
double shifted_legendre(int k, double s, double H) {
  return std::sqrt((2.0 * k + 1.0) / H) * legendre(k, 2.0 * s - 1.0);
}

// 1D pairing integrals between the fine hat functions and the coarse basis,
// separable factor of the tensor-product quadrature tables:
//   table[t][c][k] = int over fine cell t of hat_c * Lhat_k.
struct PairingTable {
  int r = 0;
  int p = 0;
  std::vector<double> data;  // r * 2 * (p+1)

  double at(int t, int c, int k) const { return data[(t * 2 + c) * (p + 1) + k]; }
};

PairingTable make_pairing_table(const CoarseSpace& coarse, const FineSpace& fine) {
  int r = refine_ratio(coarse.mesh(), fine.mesh);
  int p = coarse.degree();
  double H = coarse.mesh().h();
  double h = fine.mesh.h();
  PairingTable tab;
  tab.r = r;
  tab.p = p;
  tab.data.assign(static_cast<std::size_t>(r) * 2 * (p + 1), 0.0);
  const GaussRule& rule = gauss_legendre(p + 2);
  for (int t = 0; t < r; ++t) {
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      double s = 0.5 * (rule.points[q] + 1.0);  // local fine coordinate
      double w = 0.5 * h * rule.weights[q];
      double sc = (t + s) / r;  // local coarse coordinate
      double hat[2] = {1.0 - s, s};
      for (int k = 0; k <= p; ++k) {
        double lv = shifted_legendre(k, sc, H);
        for (int c = 0; c < 2; ++c)
          tab.data[(static_cast<std::size_t>(t) * 2 + c) * (p + 1) + k] += w * hat[c] * lv;
      }
    }
  }
  return tab;
}

}  // namespace

CoarseSpace::CoarseSpace(const CartesianMesh& mesh, int degree) : mesh_(mesh), p_(degree) {
  if (degree < 0) throw std::invalid_argument("polynomial degree must be nonnegative");
  M_ = mesh.dim == 1 ? (degree + 1) : (degree + 1) * (degree + 1);
}

double CoarseSpace::eval(index_t K, int i, double x, double y) const {
  auto [kx, ky] = mesh_.element_coords(K);
  double H = mesh_.h();
  double sx = x / H - kx;
  if (sx < -1e-12 || sx > 1.0 + 1e-12) return 0.0;
  int ix = i % (p_ + 1);
  double v = shifted_legendre(ix, sx, H);
  if (mesh_.dim == 2) {
    double sy = y / H - ky;
    if (sy < -1e-12 || sy > 1.0 + 1e-12) return 0.0;
    int iy = i / (p_ + 1);
    v *= shifted_legendre(iy, sy, H);
  }
  return v;
}

namespace {

// Shared kernel: visit all (fine free node, coarse func, weight) pairings of
// one coarse element.
template <typename F>
void visit_element_pairings(const CoarseSpace& coarse, const FineSpace& fine,
                            const PairingTable& tab, index_t K, F&& emit) {
  const CartesianMesh& cm = coarse.mesh();
  const CartesianMesh& fm = fine.mesh;
  int r = tab.r;
  int p = tab.p;
  auto [kx, ky] = cm.element_coords(K);
  if (cm.dim == 1) {
    for (int t = 0; t < r; ++t) {
      index_t e = fm.element_index(kx * r + t);
      auto verts = fm.element_vertices(e);
      for (int c = 0; c < 2; ++c) {
        index_t f = fine.free_of_node[verts[c]];
        if (f < 0) continue;
        for (int k = 0; k <= p; ++k) emit(f, k, tab.at(t, c, k));
      }
    }
  } else {
    for (int ty = 0; ty < r; ++ty) {
      for (int tx = 0; tx < r; ++tx) {
        index_t e = fm.element_index(kx * r + tx, ky * r + ty);
        auto verts = fm.element_vertices(e);
        for (int c = 0; c < 4; ++c) {
          index_t f = fine.free_of_node[verts[c]];
          if (f < 0) continue;
          int ca = c % 2, cb = c / 2;
          for (int jy = 0; jy <= p; ++jy) {
            double wy = tab.at(ty, cb, jy);
            for (int jx = 0; jx <= p; ++jx)
              emit(f, jy * (p + 1) + jx, tab.at(tx, ca, jx) * wy);
          }
        }
      }
    }
  }
}

}  // namespace

SparseMatrix constraint_matrix_full(const CoarseSpace& coarse, const FineSpace& fine) {
  int r = refine_ratio(coarse.mesh(), fine.mesh);
  if (r < coarse.degree() + 1)
    throw std::invalid_argument("fine resolution per coarse element (" + std::to_string(r) +
                                ") below p+1; constraints would be rank deficient");
  PairingTable tab = make_pairing_table(coarse, fine);
  std::vector<Triplet> trips;
  for (index_t K = 0; K < coarse.mesh().element_count(); ++K)
    visit_element_pairings(coarse, fine, tab, K, [&](index_t f, int j, double w) {
      trips.push_back({coarse.func_index(K, j), f, w});
    });
  return assemble(coarse.dim(), fine.dof(), trips);
}

SparseMatrix constraint_matrix(const CoarseSpace& coarse, const FineSpace& fine,
                               const PatchSpace& ps) {
  int r = refine_ratio(coarse.mesh(), fine.mesh);
  if (r < coarse.degree() + 1)
    throw std::invalid_argument("fine resolution per coarse element (" + std::to_string(r) +
                                ") below p+1; constraints would be rank deficient");
  PairingTable tab = make_pairing_table(coarse, fine);
  int M = coarse.funcs_per_element();
  std::vector<Triplet> trips;
  for (std::size_t pos = 0; pos < ps.patch.elements.size(); ++pos) {
    index_t K = ps.patch.elements[pos];
    visit_element_pairings(coarse, fine, tab, K, [&](index_t f, int j, double w) {
      index_t lc = ps.local_of_free[f];
      if (lc >= 0) trips.push_back({static_cast<index_t>(pos) * M + j, lc, w});
    });
  }
  return assemble(static_cast<index_t>(ps.patch.elements.size()) * M, ps.dof(), trips);
}

Vector project_PiH(const CoarseSpace& coarse, const FineSpace& fine, const Vector& v) {
  if (v.size() != fine.dof()) throw std::invalid_argument("fine vector of wrong size");
  PairingTable tab = make_pairing_table(coarse, fine);
  Vector out = Vector::Zero(coarse.dim());
  for (index_t K = 0; K < coarse.mesh().element_count(); ++K)
    visit_element_pairings(coarse, fine, tab, K, [&](index_t f, int j, double w) {
      out[coarse.func_index(K, j)] += w * v[f];
    });
  return out;
}

Vector project_on_element(const CoarseSpace& coarse, const FineSpace& fine, index_t K,
                          const Vector& v) {
  PairingTable tab = make_pairing_table(coarse, fine);
  Vector out = Vector::Zero(coarse.funcs_per_element());
  visit_element_pairings(coarse, fine, tab, K,
                         [&](index_t f, int j, double w) { out[j] += w * v[f]; });
  return out;
}

double eval_coarse(const CoarseSpace& coarse, const Vector& coeffs, double x, double y) {
  const CartesianMesh& cm = coarse.mesh();
  int n = cm.n;
  int kx = std::min(static_cast<int>(x * n), n - 1);
  int ky = cm.dim == 2 ? std::min(static_cast<int>(y * n), n - 1) : 0;
  index_t K = cm.element_index(kx, ky);
  double out = 0.0;
  for (int i = 0; i < coarse.funcs_per_element(); ++i)
    out += coeffs[coarse.func_index(K, i)] * coarse.eval(K, i, x, y);
  return out;
}

std::vector<double> coarse_element_means(const FineSpace& fine, const CartesianMesh& coarse_mesh,
                                         const Vector& v) {
  const CartesianMesh& fm = fine.mesh;
  refine_ratio(coarse_mesh, fm);  // validates alignment
  double cell = std::pow(fm.h(), fm.dim);
  double vol = std::pow(coarse_mesh.h(), fm.dim);
  int nv = fm.vertices_per_element();
  std::vector<double> means(coarse_mesh.element_count(), 0.0);
  for (index_t K = 0; K < coarse_mesh.element_count(); ++K) {
    double sum = 0.0;
    for (index_t e : fine_elements_in(K, coarse_mesh, fm)) {
      auto verts = fm.element_vertices(e);
      double s = 0.0;
      for (int c = 0; c < nv; ++c) {
        index_t f = fine.free_of_node[verts[c]];
        if (f >= 0) s += v[f];
      }
      sum += cell * s / nv;  // exact element integral of a P1/Q1 function
    }
    means[K] = sum / vol;
  }
  return means;
}

std::vector<double> average_means_to_nodes(const CartesianMesh& coarse_mesh,
                                           const std::vector<double>& means) {
  int n = coarse_mesh.n;
  std::vector<double> nodal(coarse_mesh.node_count(), 0.0);
  for (index_t z = 0; z < coarse_mesh.node_count(); ++z) {
    if (coarse_mesh.node_on_boundary(z)) continue;
    auto [ix, iy] = coarse_mesh.node_coords(z);
    double sum = 0.0;
    int cnt = 0;
    int ylo = coarse_mesh.dim == 2 ? iy - 1 : 0;
    int yhi = coarse_mesh.dim == 2 ? iy : 0;
    for (int jy = ylo; jy <= yhi; ++jy)
      for (int jx = ix - 1; jx <= ix; ++jx) {
        if (jx < 0 || jx >= n || jy < 0 || (coarse_mesh.dim == 2 && jy >= n)) continue;
        sum += means[coarse_mesh.element_index(jx, jy)];
        ++cnt;
      }
    nodal[z] = sum / cnt;  // uniform mesh: |K|/|N(z)| = 1/#elements
  }
  return nodal;
}

Vector q1_interpolant(const FineSpace& fine, const CartesianMesh& coarse_mesh,
                      const std::vector<double>& node_values) {
  const CartesianMesh& fm = fine.mesh;
  int r = refine_ratio(coarse_mesh, fm);
  Vector out = Vector::Zero(fine.dof());
  for (index_t f = 0; f < fine.dof(); ++f) {
    auto [ix, iy] = fm.node_coords(fine.node_of_free[f]);
    int cx = std::min(ix / r, coarse_mesh.n - 1);
    double sx = static_cast<double>(ix - cx * r) / r;
    if (fm.dim == 1) {
      double v0 = node_values[coarse_mesh.node_index(cx)];
      double v1 = node_values[coarse_mesh.node_index(cx + 1)];
      out[f] = (1.0 - sx) * v0 + sx * v1;
    } else {
      int cy = std::min(iy / r, coarse_mesh.n - 1);
      double sy = static_cast<double>(iy - cy * r) / r;
      double v00 = node_values[coarse_mesh.node_index(cx, cy)];
      double v10 = node_values[coarse_mesh.node_index(cx + 1, cy)];
      double v01 = node_values[coarse_mesh.node_index(cx, cy + 1)];
      double v11 = node_values[coarse_mesh.node_index(cx + 1, cy + 1)];
      out[f] = (1.0 - sx) * (1.0 - sy) * v00 + sx * (1.0 - sy) * v10 + (1.0 - sx) * sy * v01 +
               sx * sy * v11;
    }
  }
  return out;
}

Vector quasi_interpolate_IH(const FineSpace& fine, const CartesianMesh& coarse_mesh,
                            const Vector& v) {
  auto means = coarse_element_means(fine, coarse_mesh, v);
  auto nodal = average_means_to_nodes(coarse_mesh, means);
  return q1_interpolant(fine, coarse_mesh, nodal);
}

Vector c_form(const CoarseSpace& coarse, const FineSpace& fine, const Vector& v, index_t K) {
  coarse.mesh().element_coords(K);  // validates K
  Vector w = v - quasi_interpolate_IH(fine, coarse.mesh(), v);
  return project_on_element(coarse, fine, K, w);
}

}  // namespace ehlod
