#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ehlod/sparse.hpp"

namespace ehlod {

// Rosenbrock-Wanner coefficients in the standard (alpha_ij, gamma_ij, b_i)
// form with a single diagonal parameter gamma; strictly lower-triangular
// arrays stored as ragged rows (row i holds entries j < i).
struct ROWTableau {
  std::string name;
  int stages = 0;
  int order = 0;
  double gamma = 0.0;
  std::vector<std::vector<double>> alpha;
  std::vector<std::vector<double>> gamma_off;
  std::vector<double> b;

  double alpha_i(int i) const;
  double gamma_i(int i) const;

  static ROWTableau parse(std::istream& is);
  static ROWTableau parse_string(const std::string& text);
  std::string serialize() const;

  static const ROWTableau& rodas5p();
  static const ROWTableau& linearly_implicit_euler();
};

// Linear constant-coefficient system Mtil w' = Ktil w + ftil(t) with
// separable forcing ftil(t) = g * theta(t).
struct LinearSystemODE {
  SparseMatrix Mtil;
  SparseMatrix Ktil;
  Vector g;
  std::function<double(double)> theta;
  std::function<double(double)> theta_dot;

  index_t dim() const { return Ktil.rows(); }
  Vector rhs(double t, const Vector& w) const { return Ktil.apply(w) + g * theta(t); }
  Vector forcing_dt(double t) const { return g * theta_dot(t); }
  SparseMatrix shifted_matrix(double tau, double gamma) const;  // Mtil - tau*gamma*Ktil
};

// Reduced wave problem M_red u'' = -K_red u + g_red theta(t) in first-order
// form with state w = (v, u):
//   Mtil = diag(M_red, I), Ktil = [[0, -K_red], [I, 0]],
// and the forcing in the momentum row.
LinearSystemODE make_wave_system(const SparseMatrix& M_red, const SparseMatrix& K_red,
                                 const Vector& g_red, std::function<double(double)> theta,
                                 std::function<double(double)> theta_dot);

// One ROW step; F must hold the factorization of shifted_matrix(tau, tab.gamma).
Vector row_step(const ROWTableau& tab, const LinearSystemODE& sys, double t, const Vector& w,
                double tau, const Factorization& F);

// Fixed-step integration to time T; the shifted matrix is factored once.
Vector row_integrate(const ROWTableau& tab, const LinearSystemODE& sys, const Vector& w0, double T,
                     double tau);

struct RKNResult {
  Vector u;
  Vector v;
};

// Explicit 3-stage fourth-order Runge-Kutta-Nystrom scheme for
// M u'' = -K u + load(t).
RKNResult rkn4_integrate(const Factorization& M, const SparseMatrix& K,
                         const std::function<Vector(double)>& load, const Vector& u0,
                         const Vector& v0, double T, double tau);

}  // namespace ehlod
