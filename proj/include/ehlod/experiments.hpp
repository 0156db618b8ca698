#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ehlod/enrichment.hpp"
#include "ehlod/multiscale.hpp"
#include "ehlod/timeint.hpp"

namespace ehlod {

// Separable space-time forcing f(x,t) = g(x) * theta(t).
struct Forcing {
  std::string name;
  std::function<double(double, double)> g;
  std::function<double(double)> theta;
  std::function<double(double)> theta_dot;
};

Forcing forcing_by_name(const std::string& name);
void register_forcing(const Forcing& f);

struct ExperimentConfig {
  int dim = 1;
  int eps_n = 64;
  int fine_n = 1024;
  std::vector<int> coarse_n = {4, 8, 16, 32};
  int p = 1;
  int j = -1;  // -1 = auto = ceil(p/2)
  Strategy strategy = Strategy::ideal;
  std::vector<int> ell = {ell_inf};
  std::string forcing = "example2";
  double T = 1.0;
  double tau_coarse = 0.001953125;     // 2^-9
  double tau_ref = 0.0001220703125;    // 2^-13
  std::vector<double> tau_list;        // temporal sweep; empty = 2^-2 .. 2^-6
  std::uint64_t seed = 1;
  std::string out;
  int threads = 1;
  std::string cache_dir;
  std::string coefficient_file;
  double coeff_lo = 0.1;
  double coeff_hi = 1.0;
  int ell_max = 6;
  index_t decay_element = -1;  // -1 = center element

  int effective_j() const { return j >= 0 ? j : (p + 1) / 2; }
  void validate() const;

  static ExperimentConfig profile_defaults(const std::string& profile, const std::string& forcing);
  static ExperimentConfig from_map(const std::map<std::string, std::string>& kv,
                                   const std::string& profile);
  static ExperimentConfig from_file(const std::string& path, const std::string& profile);
};

std::map<std::string, std::string> parse_config_file(const std::string& path);

struct ErrorRecord {
  int dim = 1;
  double H = 0, h = 0, eps = 0;
  int p = 0, j = 0;
  std::string strategy;
  int ell = ell_inf;
  double tau = 0;
  double error_energy = 0;
  std::optional<double> eoc;
  std::string flags;
};

std::string to_csv(const std::vector<ErrorRecord>& records);
void write_csv_file(const std::string& path, const std::vector<ErrorRecord>& records);

// sqrt(e^T K e) with e = B c - u_ref.
double energy_error(const Vector& coeffs, const SparseMatrix& B, const Vector& u_ref,
                    const SparseMatrix& K_fine);

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y);

// Least-squares EOC of log2(err) against log2(scale) over the finest
// max_points entries (scale sorted descending on input).
double ls_eoc(const std::vector<double>& scale, const std::vector<double>& err,
              int max_points = 4);

// Elliptic Galerkin solution in the reduced space: solves B^T K B c = B^T f.
Vector elliptic_galerkin(const SparseMatrix& B, const SparseMatrix& K_fine, const Vector& f_fine);

std::vector<ErrorRecord> run_spatial_convergence(const ExperimentConfig& cfg);
std::vector<ErrorRecord> run_temporal_convergence(const ExperimentConfig& cfg);

struct DecayResult {
  std::vector<int> ell;
  std::vector<double> relative_exterior_energy;
  double fit_slope = 0.0;  // natural-log linear fit over the nonzero entries
};

DecayResult run_decay(const ExperimentConfig& cfg);
std::vector<ErrorRecord> decay_records(const ExperimentConfig& cfg, const DecayResult& dr);

struct LocalizationResult {
  std::vector<ErrorRecord> records;  // per strategy and ell, plus the ideal row
  std::map<std::string, int> plateau_ell;
  double ideal_error = 0.0;
};

LocalizationResult run_localization_sweep(const ExperimentConfig& cfg,
                                          const std::vector<Strategy>& strategies);

ErrorRecord solve_single(const ExperimentConfig& cfg, int coarse_n, int ell);

// Versioned binary container for a basis matrix plus its configuration.
struct BasisCacheMeta {
  std::string strategy;
  int dim = 0, coarse_n = 0, fine_n = 0, eps_n = 0, p = 0, ell = 0, j = 0;
  std::uint64_t seed = 0;
  std::uint64_t coeff_hash = 0;
};

void save_basis_cache(const std::string& path, const BasisCacheMeta& meta, const SparseMatrix& B);
std::optional<SparseMatrix> load_basis_cache(const std::string& path, const BasisCacheMeta& meta);

std::uint64_t coefficient_hash(const CoefficientField& A);

// Builds the enriched basis for one (coarse_n, ell) configuration of cfg.
SparseMatrix build_basis_for(const ExperimentConfig& cfg, int coarse_n, int ell,
                             const CoefficientField& A, const FineSpace& fine);

CoefficientField coefficient_for(const ExperimentConfig& cfg);

}  // namespace ehlod
