#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>

#include "ehlod/enrichment.hpp"
#include "ehlod/experiments.hpp"
#include "ehlod/multiscale.hpp"
#include "ehlod/timeint.hpp"

namespace py = pybind11;
using namespace ehlod;

namespace {

py::tuple sparse_as_tuple(const SparseMatrix& M) {
  auto trips = M.triplets();
  py::array_t<index_t> rows(trips.size()), cols(trips.size());
  py::array_t<double> vals(trips.size());
  auto r = rows.mutable_unchecked<1>();
  auto c = cols.mutable_unchecked<1>();
  auto v = vals.mutable_unchecked<1>();
  for (std::size_t k = 0; k < trips.size(); ++k) {
    r(k) = trips[k].row;
    c(k) = trips[k].col;
    v(k) = trips[k].value;
  }
  return py::make_tuple(py::make_tuple(M.rows(), M.cols()), rows, cols, vals);
}

ExperimentConfig config_from_dict(const py::dict& options, const std::string& profile) {
  std::map<std::string, std::string> kv;
  for (auto item : options)
    kv[py::str(item.first).cast<std::string>()] = py::str(item.second).cast<std::string>();
  return ExperimentConfig::from_map(kv, profile);
}

py::list records_to_list(const std::vector<ErrorRecord>& records) {
  py::list out;
  for (const auto& r : records) {
    py::dict d;
    d["dim"] = r.dim;
    d["H"] = r.H;
    d["h"] = r.h;
    d["eps"] = r.eps;
    d["p"] = r.p;
    d["j"] = r.j;
    d["strategy"] = r.strategy;
    d["ell"] = r.ell == ell_inf ? py::object(py::str("inf")) : py::object(py::int_(r.ell));
    d["tau"] = r.tau;
    d["error_energy"] = r.error_energy;
    d["eoc"] = r.eoc ? py::object(py::float_(*r.eoc)) : py::object(py::none());
    d["flags"] = r.flags;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "enriched higher-order multiscale solver for the heterogeneous wave equation";
  m.attr("ELL_INF") = ell_inf;

  py::class_<CartesianMesh>(m, "CartesianMesh")
      .def_readonly("dim", &CartesianMesh::dim)
      .def_readonly("n", &CartesianMesh::n)
      .def_property_readonly("h", &CartesianMesh::h)
      .def_property_readonly("element_count", &CartesianMesh::element_count)
      .def_property_readonly("node_count", &CartesianMesh::node_count)
      .def("__repr__", [](const CartesianMesh& mm) {
        return "CartesianMesh(dim=" + std::to_string(mm.dim) + ", n=" + std::to_string(mm.n) + ")";
      });

  m.def("build_mesh", &build_mesh, py::arg("dim"), py::arg("n"));
  m.def("refine_ratio", &refine_ratio, py::arg("coarse"), py::arg("fine"));
  m.def(
      "patch_elements",
      [](const CartesianMesh& mesh, const std::vector<index_t>& centers, int ell) {
        return patch(mesh, centers, ell).elements;
      },
      py::arg("mesh"), py::arg("centers"), py::arg("ell"));
  m.def("fine_elements_in", &fine_elements_in, py::arg("coarse_element"), py::arg("coarse"),
        py::arg("fine"));

  py::class_<CoefficientField>(m, "CoefficientField")
      .def_property_readonly("dim", [](const CoefficientField& f) { return f.eps_mesh.dim; })
      .def_property_readonly("eps_n", [](const CoefficientField& f) { return f.eps_mesh.n; })
      .def_readonly("alpha", &CoefficientField::alpha)
      .def_readonly("beta", &CoefficientField::beta)
      .def_property_readonly("values",
                             [](const CoefficientField& f) {
                               py::array_t<double> out(f.values.size());
                               auto v = out.mutable_unchecked<1>();
                               for (std::size_t i = 0; i < f.values.size(); ++i) v(i) = f.values[i];
                               return out;
                             })
      .def("save", &CoefficientField::save_file, py::arg("path"))
      .def_static("load", &CoefficientField::load_file, py::arg("path"));

  m.def(
      "sample_coefficient",
      [](int dim, int eps_n, double lo, double hi, std::uint64_t seed) {
        return sample_coefficient(CoefficientKind::random_uniform, dim, eps_n, lo, hi, seed);
      },
      py::arg("dim"), py::arg("eps_n"), py::arg("lo"), py::arg("hi"), py::arg("seed"));

  m.def(
      "build_basis",
      [](const std::string& strategy, int coarse_n, int fine_n, int p, int ell, int j,
         const CoefficientField& A, int threads) {
        CoarseSpace coarse(build_mesh(A.eps_mesh.dim, coarse_n), p);
        FineSpace fine = make_fine_space(build_mesh(A.eps_mesh.dim, fine_n));
        MultiscaleSpace ms =
            build_multiscale_space(strategy_from_string(strategy), coarse, fine, A, ell, threads);
        EnrichedSpace es = build_enriched_space(ms, j, A, threads);
        return sparse_as_tuple(es.combined_basis());
      },
      py::arg("strategy"), py::arg("coarse_n"), py::arg("fine_n"), py::arg("p"), py::arg("ell"),
      py::arg("j"), py::arg("coefficient"), py::arg("threads") = 1,
      "Enriched basis matrix as ((rows, cols), row_idx, col_idx, values) triplets.");

  m.def(
      "projection_coefficients",
      [](int coarse_n, int p, int fine_n, int dim, const Vector& v) {
        CoarseSpace coarse(build_mesh(dim, coarse_n), p);
        FineSpace fine = make_fine_space(build_mesh(dim, fine_n));
        return project_PiH(coarse, fine, v);
      },
      py::arg("coarse_n"), py::arg("p"), py::arg("fine_n"), py::arg("dim"), py::arg("values"),
      "Element-local L2 projection of a fine free-node vector.");

  m.def("rodas5p_tableau", [] { return ROWTableau::rodas5p().serialize(); });
  m.def("ls_eoc", &ls_eoc, py::arg("scale"), py::arg("err"), py::arg("max_points") = 4);

  m.def(
      "run_spatial",
      [](const py::dict& options, const std::string& profile) {
        return records_to_list(run_spatial_convergence(config_from_dict(options, profile)));
      },
      py::arg("options") = py::dict(), py::arg("profile") = "desk");
  m.def(
      "run_temporal",
      [](const py::dict& options, const std::string& profile) {
        return records_to_list(run_temporal_convergence(config_from_dict(options, profile)));
      },
      py::arg("options") = py::dict(), py::arg("profile") = "desk");
  m.def(
      "run_decay",
      [](const py::dict& options, const std::string& profile) {
        DecayResult dr = run_decay(config_from_dict(options, profile));
        py::dict out;
        out["ell"] = dr.ell;
        out["relative_exterior_energy"] = dr.relative_exterior_energy;
        out["fit_slope"] = dr.fit_slope;
        return out;
      },
      py::arg("options") = py::dict(), py::arg("profile") = "desk");
  m.def(
      "run_localization",
      [](const py::dict& options, const std::vector<std::string>& strategies,
         const std::string& profile) {
        std::vector<Strategy> list;
        for (const auto& s : strategies) list.push_back(strategy_from_string(s));
        LocalizationResult res =
            run_localization_sweep(config_from_dict(options, profile), list);
        py::dict out;
        out["records"] = records_to_list(res.records);
        out["plateau_ell"] = res.plateau_ell;
        out["ideal_error"] = res.ideal_error;
        return out;
      },
      py::arg("options") = py::dict(),
      py::arg("strategies") = std::vector<std::string>{"naive", "bubble", "generalized"},
      py::arg("profile") = "desk");
  m.def(
      "solve_one",
      [](const py::dict& options, const std::string& profile) {
        ExperimentConfig cfg = config_from_dict(options, profile);
        std::vector<ErrorRecord> records = {
            solve_single(cfg, cfg.coarse_n.front(), cfg.ell.front())};
        return records_to_list(records);
      },
      py::arg("options") = py::dict(), py::arg("profile") = "desk");
  m.def(
      "records_csv",
      [](const py::dict& options, const std::string& kind, const std::string& profile) {
        ExperimentConfig cfg = config_from_dict(options, profile);
        if (kind == "spatial") return to_csv(run_spatial_convergence(cfg));
        if (kind == "temporal") return to_csv(run_temporal_convergence(cfg));
        throw std::invalid_argument("kind must be spatial or temporal");
      },
      py::arg("options"), py::arg("kind"), py::arg("profile") = "desk");
}
