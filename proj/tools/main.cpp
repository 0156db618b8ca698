// Experiment driver: builds multiscale bases and reproduces the spatial,
// temporal, localization, and decay studies as CSV tables.
#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <string>

#include "ehlod/enrichment.hpp"
#include "ehlod/experiments.hpp"
#include "ehlod/multiscale.hpp"

using namespace ehlod;

namespace {

struct GlobalOpts {
  std::string config;
  std::string profile = "desk";
  std::string out;
  std::string seed;
  std::string threads;
};

ExperimentConfig load_config(const GlobalOpts& g) {
  std::map<std::string, std::string> kv;
  if (!g.config.empty()) kv = parse_config_file(g.config);
  if (!g.seed.empty()) kv["seed"] = g.seed;
  if (!g.threads.empty()) kv["threads"] = g.threads;
  if (!g.out.empty()) kv["out"] = g.out;
  return ExperimentConfig::from_map(kv, g.profile);
}

void emit(const ExperimentConfig& cfg, const std::vector<ErrorRecord>& records) {
  if (cfg.out.empty())
    std::cout << to_csv(records);
  else
    std::printf("wrote %zu records to %s\n", records.size(), cfg.out.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"enriched higher-order multiscale wave solver"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  app.add_option("--config", g.config, "key-value config file");
  app.add_option("--profile", g.profile, "parameter profile: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--seed", g.seed, "coefficient seed");
  app.add_option("--out", g.out, "output path (CSV or cache file)");
  app.add_option("--threads", g.threads, "worker threads for patch solves");

  auto* cmd_basis =
      app.add_subcommand("basis", "build the enriched basis and write the cache container");
  std::string save_coefficient;
  cmd_basis->add_option("--save-coefficient", save_coefficient,
                        "also write the sampled coefficient field (plain text)");
  auto* cmd_solve = app.add_subcommand("solve", "solve one configuration against the reference");
  auto* cmd_spatial = app.add_subcommand("spatial", "spatial convergence sweep over coarse_n");
  auto* cmd_temporal = app.add_subcommand("temporal", "temporal convergence sweep over tau");
  auto* cmd_decay = app.add_subcommand("decay", "exterior-energy decay of an ideal basis function");
  auto* cmd_loc = app.add_subcommand("localization", "error versus localization parameter");
  std::string strategies = "naive,bubble,generalized";
  cmd_loc->add_option("--strategies", strategies, "comma list of strategies to sweep");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = load_config(g);

    if (cmd_basis->parsed()) {
      CoefficientField A = coefficient_for(cfg);
      if (!save_coefficient.empty()) A.save_file(save_coefficient);
      FineSpace fine = make_fine_space(build_mesh(cfg.dim, cfg.fine_n));
      int cn = cfg.coarse_n.front();
      int ell = cfg.ell.front();
      SparseMatrix B = build_basis_for(cfg, cn, ell, A, fine);
      BasisCacheMeta meta{to_string(cfg.strategy), cfg.dim,  cn,  cfg.fine_n,
                          cfg.eps_n,               cfg.p,    ell, cfg.effective_j(),
                          cfg.seed,                coefficient_hash(A)};
      std::string path = cfg.out.empty() ? "basis.bin" : cfg.out;
      save_basis_cache(path, meta, B);
      std::printf("basis %lld x %lld (strategy=%s, coarse_n=%d, ell=%s, j=%d) -> %s\n",
                  static_cast<long long>(B.rows()), static_cast<long long>(B.cols()),
                  to_string(cfg.strategy).c_str(), cn,
                  ell == ell_inf ? "inf" : std::to_string(ell).c_str(), cfg.effective_j(),
                  path.c_str());
    } else if (cmd_solve->parsed()) {
      ErrorRecord r = solve_single(cfg, cfg.coarse_n.front(), cfg.ell.front());
      std::vector<ErrorRecord> records = {r};
      if (!cfg.out.empty()) write_csv_file(cfg.out, records);
      emit(cfg, records);
    } else if (cmd_spatial->parsed()) {
      emit(cfg, run_spatial_convergence(cfg));
    } else if (cmd_temporal->parsed()) {
      emit(cfg, run_temporal_convergence(cfg));
    } else if (cmd_decay->parsed()) {
      DecayResult dr = run_decay(cfg);
      auto records = decay_records(cfg, dr);
      if (!cfg.out.empty()) write_csv_file(cfg.out, records);
      emit(cfg, records);
      std::printf("# fit_slope %.6f\n", dr.fit_slope);
    } else if (cmd_loc->parsed()) {
      std::vector<Strategy> list;
      std::string cur;
      for (char c : strategies + ",") {
        if (c == ',') {
          if (!cur.empty()) list.push_back(strategy_from_string(cur));
          cur.clear();
        } else {
          cur += c;
        }
      }
      LocalizationResult res = run_localization_sweep(cfg, list);
      emit(cfg, res.records);
      std::printf("# ideal_error %.17g\n", res.ideal_error);
      for (const auto& [name, ell] : res.plateau_ell)
        std::printf("# plateau %s %d\n", name.c_str(), ell);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
