#include "ehlod/timeint.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace ehlod {

double ROWTableau::alpha_i(int i) const {
  double s = 0.0;
  for (double v : alpha[i]) s += v;
  return s;
}

double ROWTableau::gamma_i(int i) const {
  double s = gamma;
  for (double v : gamma_off[i]) s += v;
  return s;
}

ROWTableau ROWTableau::parse(std::istream& is) {
  auto next_line = [&is](std::string& line) {
    while (std::getline(is, line)) {
      std::size_t pos = line.find_first_not_of(" \t\r");
      if (pos == std::string::npos || line[pos] == '#') continue;
      return true;
    }
    return false;
  };
  std::string line;
  if (!next_line(line)) throw std::runtime_error("empty tableau stream");
  ROWTableau tab;
  {
    std::istringstream hs(line);
    if (!(hs >> tab.name >> tab.stages >> tab.order >> tab.gamma))
      throw std::runtime_error("malformed tableau header");
  }
  if (tab.stages < 1) throw std::runtime_error("tableau needs at least one stage");
  auto read_rows = [&](std::vector<std::vector<double>>& rows) {
    rows.assign(tab.stages, {});
    for (int i = 1; i < tab.stages; ++i) {
      if (!next_line(line)) throw std::runtime_error("truncated tableau");
      std::istringstream rs(line);
      rows[i].resize(i);
      for (int j = 0; j < i; ++j)
        if (!(rs >> rows[i][j])) throw std::runtime_error("short tableau row");
      double extra;
      if (rs >> extra) throw std::runtime_error("tableau row has too many entries");
    }
  };
  read_rows(tab.alpha);
  read_rows(tab.gamma_off);
  if (!next_line(line)) throw std::runtime_error("truncated tableau: missing weights");
  std::istringstream bs(line);
  tab.b.resize(tab.stages);
  for (int i = 0; i < tab.stages; ++i)
    if (!(bs >> tab.b[i])) throw std::runtime_error("short weight row");
  return tab;
}

ROWTableau ROWTableau::parse_string(const std::string& text) {
  std::istringstream is(text);
  return parse(is);
}

std::string ROWTableau::serialize() const {
  std::ostringstream os;
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  os << name << " " << stages << " " << order << " ";
  put(gamma);
  os << "\n";
  for (int i = 1; i < stages; ++i) {
    for (int j = 0; j < i; ++j) {
      if (j) os << " ";
      put(alpha[i][j]);
    }
    os << "\n";
  }
  for (int i = 1; i < stages; ++i) {
    for (int j = 0; j < i; ++j) {
      if (j) os << " ";
      put(gamma_off[i][j]);
    }
    os << "\n";
  }
  for (int i = 0; i < stages; ++i) {
    if (i) os << " ";
    put(b[i]);
  }
  os << "\n";
  return os.str();
}

namespace {

// Rodas5P (Steinebach 2023) in standard ROW form, converted from the
// transformed implementation coefficients.
constexpr const char* kRodas5P = R"(rodas5p 8 5 0.21193756319429014
0.63581268958287042
0.31242290829798819 0.097156931041765272
1.3140825753299272 1.8583084874257939 -2.1954603902496502
0.42153145792836008 0.25386966273008991 -0.23655479053262386 -0.010005969169959592
1.7120280621215363 2.4456320333807950 -3.1172548398276028 -0.046805382663106134 0.0064001269883776445
-0.99930302157392600 -1.5559156221686077 3.1251564324842264 0.24141811637172583 -0.023293468307707061 0.21193756319429014
-0.0034872501992645405 -0.12996697120564568 1.5259417608062798 1.1496140949123891 -0.70433571158824164 -1.0497034859198031 0.21193756319429014
-0.63581268958287036
-0.42194991444764403 -0.12845036137023836
0.38766328985840545 -2.0150665034868993 3.2201109377224790
3.1657305330089680 1.3574038770338351 -2.1414486119160854 -0.26779772155593990
-2.7113310836954623 -4.0015476555494026 6.2424112723118292 0.28822349903483197 -0.029693595296084705
0.99581577137466146 1.4259486509629620 -1.5992146716779467 0.90819597854066324 -0.68104224328053458 -1.2616410491140932
0.12584733011226948 0.18020585308982839 -0.20210253993990516 0.11477428094984265 -0.086067473998941294 0.081610210500374377 -0.42620522390775709
0.12236007991300494 0.050238881884182707 1.3238392208663746 1.2643883758622317 -0.79040318558718293 -0.96809327541942870 -0.21426766071346695 0.21193756319429014
)";

constexpr const char* kLinImplicitEuler = R"(linearly_implicit_euler 1 1 1.0
1.0
)";

}  // namespace

const ROWTableau& ROWTableau::rodas5p() {
  static const ROWTableau tab = parse_string(kRodas5P);
  return tab;
}

const ROWTableau& ROWTableau::linearly_implicit_euler() {
  static const ROWTableau tab = parse_string(kLinImplicitEuler);
  return tab;
}

SparseMatrix LinearSystemODE::shifted_matrix(double tau, double gamma) const {
  std::vector<Triplet> trips;
  trips.reserve(Mtil.nnz() + Ktil.nnz());
  for (const auto& t : Mtil.triplets()) trips.push_back(t);
  for (const auto& t : Ktil.triplets()) trips.push_back({t.row, t.col, -tau * gamma * t.value});
  return assemble(dim(), dim(), trips);
}

LinearSystemODE make_wave_system(const SparseMatrix& M_red, const SparseMatrix& K_red,
                                 const Vector& g_red, std::function<double(double)> theta,
                                 std::function<double(double)> theta_dot) {
  index_t m = K_red.rows();
  if (M_red.rows() != m || g_red.size() != m)
    throw std::invalid_argument("reduced blocks have mismatched dimensions");
  LinearSystemODE sys;
  std::vector<Triplet> mt;
  for (const auto& t : M_red.triplets()) mt.push_back(t);
  for (index_t i = 0; i < m; ++i) mt.push_back({m + i, m + i, 1.0});
  sys.Mtil = assemble(2 * m, 2 * m, mt);
  std::vector<Triplet> kt;
  for (const auto& t : K_red.triplets()) kt.push_back({t.row, m + t.col, -t.value});
  for (index_t i = 0; i < m; ++i) kt.push_back({m + i, i, 1.0});
  sys.Ktil = assemble(2 * m, 2 * m, kt);
  sys.g = Vector::Zero(2 * m);
  sys.g.head(m) = g_red;
  sys.theta = std::move(theta);
  sys.theta_dot = std::move(theta_dot);
  return sys;
}

Vector row_step(const ROWTableau& tab, const LinearSystemODE& sys, double t, const Vector& w,
                double tau, const Factorization& F) {
  if (tau <= 0.0) throw std::invalid_argument("step size must be positive");
  if (!sys.theta) throw std::invalid_argument("theta is required");
  if (!sys.theta_dot)
    throw std::invalid_argument("theta_dot is required; no finite-difference fallback");
  int s = tab.stages;
  std::vector<Vector> k(s);
  Vector wnext = w;
  for (int i = 0; i < s; ++i) {
    Vector arg = w;
    for (int j = 0; j < i; ++j) arg += tab.alpha[i][j] * k[j];
    Vector gsum = Vector::Zero(w.size());
    for (int j = 0; j < i; ++j) gsum += tab.gamma_off[i][j] * k[j];
    Vector rhs = tau * sys.rhs(t + tab.alpha_i(i) * tau, arg) + tau * sys.Ktil.apply(gsum) +
                 tau * tau * tab.gamma_i(i) * sys.forcing_dt(t);
    k[i] = F.solve(rhs);
    wnext += tab.b[i] * k[i];
  }
  return wnext;
}

Vector row_integrate(const ROWTableau& tab, const LinearSystemODE& sys, const Vector& w0, double T,
                     double tau) {
  if (tau <= 0.0) throw std::invalid_argument("step size must be positive");
  if (tau > T) throw std::invalid_argument("step size exceeds the final time");
  double ratio = T / tau;
  auto steps = static_cast<long long>(std::llround(ratio));
  if (steps < 1 || std::abs(ratio - static_cast<double>(steps)) > 1e-8)
    throw std::invalid_argument("T must be an integer multiple of tau");
  if (!sys.theta) throw std::invalid_argument("theta is required");
  if (!sys.theta_dot)
    throw std::invalid_argument("theta_dot is required; no finite-difference fallback");
  Factorization F = factorize(sys.shifted_matrix(tau, tab.gamma));
  Vector w = w0;
  for (long long n = 0; n < steps; ++n) w = row_step(tab, sys, n * tau, w, tau, F);
  return w;
}

RKNResult rkn4_integrate(const Factorization& M, const SparseMatrix& K,
                         const std::function<Vector(double)>& load, const Vector& u0,
                         const Vector& v0, double T, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("step size must be positive");
  double ratio = T / tau;
  auto steps = static_cast<long long>(std::llround(ratio));
  if (steps < 1 || std::abs(ratio - static_cast<double>(steps)) > 1e-8)
    throw std::invalid_argument("T must be an integer multiple of tau");
  double scale = std::max({1.0, u0.lpNorm<Eigen::Infinity>(), v0.lpNorm<Eigen::Infinity>()});
  auto acc = [&](double t, const Vector& u) { return M.solve(load(t) - K.apply(u)); };
  Vector u = u0, v = v0;
  for (long long n = 0; n < steps; ++n) {
    double t = n * tau;
    Vector k1 = acc(t, u);
    Vector k2 = acc(t + 0.5 * tau, u + 0.5 * tau * v + 0.125 * tau * tau * k1);
    Vector k3 = acc(t + tau, u + tau * v + 0.5 * tau * tau * k2);
    u += tau * v + tau * tau / 6.0 * (k1 + 2.0 * k2);
    v += tau / 6.0 * (k1 + 4.0 * k2 + k3);
    if (u.lpNorm<Eigen::Infinity>() > 1e8 * scale)
      throw std::runtime_error("explicit integrator unstable: state exceeded 1e8x the data scale");
  }
  return {u, v};
}

}  // namespace ehlod
