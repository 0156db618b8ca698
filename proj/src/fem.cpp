#include "ehlod/fem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ehlod/quadrature.hpp"

namespace ehlod {

const GaussRule& gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("quadrature needs at least one point");
  static std::map<int, GaussRule> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  GaussRule rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Newton iteration from the Chebyshev initial guess.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.points[i] = -x;
    rule.weights[i] = w;
    rule.points[n - 1 - i] = x;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.points[n / 2] = 0.0;
  return cache.emplace(n, std::move(rule)).first->second;
}

double CoefficientField::value_on_fine_element(const CartesianMesh& fine, index_t e) const {
  int r = refine_ratio(eps_mesh, fine);  // validates alignment
  auto [fx, fy] = fine.element_coords(e);
  return values[eps_mesh.element_index(fx / r, fy / r)];
}

void CoefficientField::save(std::ostream& os) const {
  os << eps_mesh.dim << " " << eps_mesh.n << "\n";
  char buf[40];
  for (double v : values) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf << "\n";
  }
}

void CoefficientField::save_file(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  save(os);
}

CoefficientField CoefficientField::load(std::istream& is) {
  int dim = 0, n = 0;
  if (!(is >> dim >> n)) throw std::runtime_error("malformed coefficient header");
  CoefficientField f;
  f.eps_mesh = build_mesh(dim, n);
  f.values.resize(f.eps_mesh.element_count());
  for (double& v : f.values)
    if (!(is >> v)) throw std::runtime_error("truncated coefficient file");
  f.alpha = *std::min_element(f.values.begin(), f.values.end());
  f.beta = *std::max_element(f.values.begin(), f.values.end());
  if (f.alpha <= 0.0) throw std::runtime_error("coefficient violates ellipticity: min value <= 0");
  return f;
}

CoefficientField CoefficientField::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return load(is);
}

CoefficientField sample_coefficient(CoefficientKind kind, int dim, int eps_n, double lo, double hi,
                                    std::uint64_t seed) {
  if (kind != CoefficientKind::random_uniform)
    throw std::invalid_argument("unknown coefficient kind");
  if (lo <= 0.0) throw std::invalid_argument("coefficient lower bound must be positive");
  if (hi < lo) throw std::invalid_argument("coefficient bounds out of order");
  CoefficientField f;
  f.eps_mesh = build_mesh(dim, eps_n);
  f.values.resize(f.eps_mesh.element_count());
  // mt19937_64 with the 53-bit mantissa map; identical streams on all platforms.
  std::mt19937_64 rng(seed);
  for (double& v : f.values) {
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = lo + (hi - lo) * u;
  }
  f.alpha = *std::min_element(f.values.begin(), f.values.end());
  f.beta = *std::max_element(f.values.begin(), f.values.end());
  return f;
}

CoefficientField constant_coefficient(int dim, double value) {
  if (value <= 0.0) throw std::invalid_argument("coefficient must be positive");
  CoefficientField f;
  f.eps_mesh = build_mesh(dim, 1);
  f.values = {value};
  f.alpha = f.beta = value;
  return f;
}

FineSpace make_fine_space(const CartesianMesh& mesh) {
  FineSpace s;
  s.mesh = mesh;
  s.free_of_node.assign(mesh.node_count(), -1);
  for (index_t v = 0; v < mesh.node_count(); ++v) {
    if (mesh.node_on_boundary(v)) continue;
    s.free_of_node[v] = static_cast<index_t>(s.node_of_free.size());
    s.node_of_free.push_back(v);
  }
  return s;
}

PatchSpace make_patch_space(const Patch& p, const CartesianMesh& coarse, const FineSpace& fine) {
  PatchSpace ps;
  ps.patch = p;
  for (index_t K : p.elements) {
    auto fe = fine_elements_in(K, coarse, fine.mesh);
    ps.fine_elements.insert(ps.fine_elements.end(), fe.begin(), fe.end());
  }
  std::sort(ps.fine_elements.begin(), ps.fine_elements.end());

  std::vector<char> in_patch(fine.mesh.element_count(), 0);
  for (index_t e : ps.fine_elements) in_patch[e] = 1;

  const CartesianMesh& m = fine.mesh;
  ps.local_of_free.assign(fine.dof(), -1);
  for (index_t f = 0; f < fine.dof(); ++f) {
    auto [ix, iy] = m.node_coords(fine.node_of_free[f]);
    bool interior = true;
    int ylo = m.dim == 2 ? iy - 1 : 0;
    int yhi = m.dim == 2 ? iy : 0;
    for (int jy = ylo; jy <= yhi && interior; ++jy)
      for (int jx = ix - 1; jx <= ix && interior; ++jx)
        if (!in_patch[m.element_index(jx, jy)]) interior = false;
    if (interior) {
      ps.local_of_free[f] = static_cast<index_t>(ps.free_nodes.size());
      ps.free_nodes.push_back(f);
    }
  }
  return ps;
}

namespace {

// 1D P1 element matrices on an interval of length h.
inline void element_matrices_1d(double h, double k[2][2], double m[2][2]) {
  k[0][0] = k[1][1] = 1.0 / h;
  k[0][1] = k[1][0] = -1.0 / h;
  m[0][0] = m[1][1] = 2.0 * h / 6.0;
  m[0][1] = m[1][0] = h / 6.0;
}

}  // namespace

SparseMatrix assemble_stiffness(const FineSpace& space, const CoefficientField& A) {
  const CartesianMesh& m = space.mesh;
  double h = m.h();
  double k1[2][2], m1[2][2];
  element_matrices_1d(h, k1, m1);
  std::vector<Triplet> trips;
  int nv = m.vertices_per_element();
  trips.reserve(m.element_count() * nv * nv);
  for (index_t e = 0; e < m.element_count(); ++e) {
    double a = A.value_on_fine_element(m, e);
    auto verts = m.element_vertices(e);
    for (int q = 0; q < nv; ++q) {
      index_t rq = space.free_of_node[verts[q]];
      if (rq < 0) continue;
      for (int r = 0; r < nv; ++r) {
        index_t rc = space.free_of_node[verts[r]];
        if (rc < 0) continue;
        double val;
        if (m.dim == 1) {
          val = a * k1[q][r];
        } else {
          int qa = q % 2, qb = q / 2, ra = r % 2, rb = r / 2;
          val = a * (k1[qa][ra] * m1[qb][rb] + m1[qa][ra] * k1[qb][rb]);
        }
        trips.push_back({rq, rc, val});
      }
    }
  }
  return assemble(space.dof(), space.dof(), trips);
}

SparseMatrix assemble_mass(const FineSpace& space) {
  const CartesianMesh& m = space.mesh;
  double h = m.h();
  double k1[2][2], m1[2][2];
  element_matrices_1d(h, k1, m1);
  std::vector<Triplet> trips;
  int nv = m.vertices_per_element();
  trips.reserve(m.element_count() * nv * nv);
  for (index_t e = 0; e < m.element_count(); ++e) {
    auto verts = m.element_vertices(e);
    for (int q = 0; q < nv; ++q) {
      index_t rq = space.free_of_node[verts[q]];
      if (rq < 0) continue;
      for (int r = 0; r < nv; ++r) {
        index_t rc = space.free_of_node[verts[r]];
        if (rc < 0) continue;
        double val;
        if (m.dim == 1) {
          val = m1[q][r];
        } else {
          int qa = q % 2, qb = q / 2, ra = r % 2, rb = r / 2;
          val = m1[qa][ra] * m1[qb][rb];
        }
        trips.push_back({rq, rc, val});
      }
    }
  }
  return assemble(space.dof(), space.dof(), trips);
}

SparseMatrix assemble_mass_full(const CartesianMesh& mesh) {
  double h = mesh.h();
  double k1[2][2], m1[2][2];
  element_matrices_1d(h, k1, m1);
  std::vector<Triplet> trips;
  int nv = mesh.vertices_per_element();
  for (index_t e = 0; e < mesh.element_count(); ++e) {
    auto verts = mesh.element_vertices(e);
    for (int q = 0; q < nv; ++q)
      for (int r = 0; r < nv; ++r) {
        double val;
        if (mesh.dim == 1) {
          val = m1[q][r];
        } else {
          int qa = q % 2, qb = q / 2, ra = r % 2, rb = r / 2;
          val = m1[qa][ra] * m1[qb][rb];
        }
        trips.push_back({verts[q], verts[r], val});
      }
  }
  return assemble(mesh.node_count(), mesh.node_count(), trips);
}

Vector assemble_load(const FineSpace& space, const std::function<double(double, double)>& g,
                     int quad_pts) {
  if (quad_pts < 1) throw std::invalid_argument("quadrature needs at least one point");
  const CartesianMesh& m = space.mesh;
  const GaussRule& rule = gauss_legendre(quad_pts);
  double h = m.h();
  Vector out = Vector::Zero(space.dof());
  for (index_t e = 0; e < m.element_count(); ++e) {
    auto [ex, ey] = m.element_coords(e);
    double x0 = ex * h, y0 = ey * h;
    auto verts = m.element_vertices(e);
    if (m.dim == 1) {
      for (int q = 0; q < quad_pts; ++q) {
        double s = 0.5 * (rule.points[q] + 1.0);
        double w = 0.5 * h * rule.weights[q];
        double gv = g(x0 + s * h, 0.0);
        double shp[2] = {1.0 - s, s};
        for (int c = 0; c < 2; ++c) {
          index_t f = space.free_of_node[verts[c]];
          if (f >= 0) out[f] += w * gv * shp[c];
        }
      }
    } else {
      for (int qy = 0; qy < quad_pts; ++qy) {
        double sy = 0.5 * (rule.points[qy] + 1.0);
        for (int qx = 0; qx < quad_pts; ++qx) {
          double sx = 0.5 * (rule.points[qx] + 1.0);
          double w = 0.25 * h * h * rule.weights[qx] * rule.weights[qy];
          double gv = g(x0 + sx * h, y0 + sy * h);
          double shx[2] = {1.0 - sx, sx}, shy[2] = {1.0 - sy, sy};
          for (int c = 0; c < 4; ++c) {
            index_t f = space.free_of_node[verts[c]];
            if (f >= 0) out[f] += w * gv * shx[c % 2] * shy[c / 2];
          }
        }
      }
    }
  }
  return out;
}

SparseMatrix restrict_to_patch(const SparseMatrix& M, const PatchSpace& ps) {
  if (ps.dof() == 0) throw std::invalid_argument("patch has empty interior");
  if (M.rows() != static_cast<index_t>(ps.local_of_free.size()))
    throw std::invalid_argument("matrix not assembled on the matching fine space");
  std::vector<Triplet> trips;
  const auto& raw = M.raw();
  for (index_t lr = 0; lr < ps.dof(); ++lr) {
    index_t gr = ps.free_nodes[lr];
    for (SparseMatrix::Storage::InnerIterator it(raw, gr); it; ++it) {
      index_t lc = ps.local_of_free[it.col()];
      if (lc >= 0) trips.push_back({lr, lc, it.value()});
    }
  }
  return assemble(ps.dof(), ps.dof(), trips);
}

Vector restrict_vector(const PatchSpace& ps, const Vector& global) {
  Vector out(ps.dof());
  for (index_t l = 0; l < ps.dof(); ++l) out[l] = global[ps.free_nodes[l]];
  return out;
}

void scatter_add(const PatchSpace& ps, const Vector& local, Vector& global) {
  for (index_t l = 0; l < ps.dof(); ++l) global[ps.free_nodes[l]] += local[l];
}

Vector apply_stiffness_on_elements(const FineSpace& space, const CoefficientField& A,
                                   const std::vector<index_t>& fine_elements, const Vector& v) {
  const CartesianMesh& m = space.mesh;
  double h = m.h();
  double k1[2][2], m1[2][2];
  element_matrices_1d(h, k1, m1);
  Vector out = Vector::Zero(space.dof());
  int nv = m.vertices_per_element();
  for (index_t e : fine_elements) {
    double a = A.value_on_fine_element(m, e);
    auto verts = m.element_vertices(e);
    double loc[4] = {0, 0, 0, 0};
    for (int c = 0; c < nv; ++c) {
      index_t f = space.free_of_node[verts[c]];
      loc[c] = f >= 0 ? v[f] : 0.0;
    }
    for (int q = 0; q < nv; ++q) {
      index_t f = space.free_of_node[verts[q]];
      if (f < 0) continue;
      double acc = 0.0;
      for (int r = 0; r < nv; ++r) {
        double val;
        if (m.dim == 1) {
          val = k1[q][r];
        } else {
          int qa = q % 2, qb = q / 2, ra = r % 2, rb = r / 2;
          val = k1[qa][ra] * m1[qb][rb] + m1[qa][ra] * k1[qb][rb];
        }
        acc += val * loc[r];
      }
      out[f] += a * acc;
    }
  }
  return out;
}

double gradient_seminorm_sq(const FineSpace& space, const Vector& v,
                            const std::vector<char>& element_mask) {
  const CartesianMesh& m = space.mesh;
  double h = m.h();
  double k1[2][2], m1[2][2];
  element_matrices_1d(h, k1, m1);
  int nv = m.vertices_per_element();
  double total = 0.0;
  for (index_t e = 0; e < m.element_count(); ++e) {
    if (!element_mask[e]) continue;
    auto verts = m.element_vertices(e);
    double loc[4] = {0, 0, 0, 0};
    for (int c = 0; c < nv; ++c) {
      index_t f = space.free_of_node[verts[c]];
      loc[c] = f >= 0 ? v[f] : 0.0;
    }
    for (int q = 0; q < nv; ++q)
      for (int r = 0; r < nv; ++r) {
        double val;
        if (m.dim == 1) {
          val = k1[q][r];
        } else {
          int qa = q % 2, qb = q / 2, ra = r % 2, rb = r / 2;
          val = k1[qa][ra] * m1[qb][rb] + m1[qa][ra] * k1[qb][rb];
        }
        total += loc[q] * val * loc[r];
      }
  }
  return total;
}

double l2_norm_sq_on_coarse_element(const FineSpace& space, const CartesianMesh& coarse,
                                    index_t K, const Vector& v) {
  const CartesianMesh& m = space.mesh;
  double h = m.h();
  double k1[2][2], m1[2][2];
  element_matrices_1d(h, k1, m1);
  int nv = m.vertices_per_element();
  double total = 0.0;
  for (index_t e : fine_elements_in(K, coarse, m)) {
    auto verts = m.element_vertices(e);
    double loc[4] = {0, 0, 0, 0};
    for (int c = 0; c < nv; ++c) {
      index_t f = space.free_of_node[verts[c]];
      loc[c] = f >= 0 ? v[f] : 0.0;
    }
    for (int q = 0; q < nv; ++q)
      for (int r = 0; r < nv; ++r) {
        double val;
        if (m.dim == 1) {
          val = m1[q][r];
        } else {
          int qa = q % 2, qb = q / 2, ra = r % 2, rb = r / 2;
          val = m1[qa][ra] * m1[qb][rb];
        }
        total += loc[q] * val * loc[r];
      }
  }
  return total;
}

}  // namespace ehlod
