// SPDX-License-Identifier: Apache-2.0
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "rvesurr/error.hpp"
#include "rvesurr/micromodel.hpp"
#include "rvesurr/pathgen.hpp"
#include "rvesurr/pca.hpp"
#include "rvesurr/pipeline.hpp"
#include "rvesurr/surrogate.hpp"

namespace py = pybind11;
using namespace rvesurr;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const Block& b) {
  Array a({b.rows, b.cols});
  std::copy(b.data.begin(), b.data.end(), a.mutable_data());
  return a;
}

Block from_numpy(const Array& a) {
  if (a.ndim() != 2) throw InvalidInput("expected a 2-d array");
  Block b(std::size_t(a.shape(0)), std::size_t(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), b.data.begin());
  return b;
}

std::array<double, 6> sym_to_array(const SymTensor2& s) { return {s.xx, s.yy, s.zz, s.xy, s.yz, s.xz}; }
SymTensor2 sym_from_array(const std::array<double, 6>& a) { return {a[0], a[1], a[2], a[3], a[4], a[5]}; }

py::dict record_to_dict(const SequenceRecord& r) {
  py::dict d;
  d["inputs"] = to_numpy(r.inputs);
  d["gamma"] = to_numpy(r.gamma);
  d["tau"] = to_numpy(r.tau);
  d["flags"] = int(r.flags);
  return d;
}

SequenceRecord record_from_dict(const py::dict& d) {
  SequenceRecord r;
  r.inputs = from_numpy(d["inputs"].cast<Array>());
  r.gamma = from_numpy(d["gamma"].cast<Array>());
  r.tau = from_numpy(d["tau"].cast<Array>());
  if (d.contains("flags")) r.flags = d["flags"].cast<std::uint8_t>();
  r.validate();
  return r;
}

}  // namespace

PYBIND11_MODULE(_rvesurr, m) {
  m.doc() = "RVE state-variable surrogates: data generation, PCA and GRU models";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<MissingArtifact>(m, "MissingArtifact", base.ptr());

  // kinematics and paths
  m.def("u_to_e", [](const std::array<double, 6>& u) { return sym_to_array(u_to_e(sym_from_array(u))); },
        "Green-Lagrange strain (xx, yy, zz, xy, yz, xz) of a right stretch tensor", py::arg("u"));

  m.def(
      "random_path",
      [](std::uint64_t seed, double delta_r, double delta_r_min, double r_max, int max_steps) {
        RandomWalkConfig c;
        c.seed = seed;
        c.delta_r = delta_r;
        c.delta_r_min = delta_r_min;
        c.r_max = r_max;
        c.max_steps = max_steps;
        const LoadingPath p = generate_random_path(c);
        Block u(p.size(), 6), e(p.size(), 6);
        for (std::size_t i = 0; i < p.size(); ++i) {
          const auto a = sym_to_array(p.steps[i]), b = sym_to_array(p.strains[i]);
          std::copy(a.begin(), a.end(), u.row(i).begin());
          std::copy(b.begin(), b.end(), e.row(i).begin());
        }
        return py::make_tuple(to_numpy(u), to_numpy(e));
      },
      "Random-walk path; returns (stretch, strain) arrays of shape (steps, 6)", py::arg("seed"),
      py::arg("delta_r") = 5e-3, py::arg("delta_r_min") = 5e-4, py::arg("r_max") = 0.1, py::arg("max_steps") = 5000);

  m.def(
      "generate_dataset",
      [](int n_random, int n_cyclic, int d_gamma, int n_fiber, std::uint64_t seed, double delta_r, int jobs) {
        PathsSection ps;
        ps.n_random = n_random;
        ps.n_cyclic = n_cyclic;
        ps.delta_r = delta_r;
        ps.delta_r_min = delta_r / 10.0;
        ps.seed = seed;
        EnsembleSection es;
        es.d_gamma = d_gamma;
        es.n_fiber = n_fiber;
        es.seed = derive_seed(seed, 2);
        const auto paths = generate_paths(ps);
        std::vector<SequenceRecord> recs;
        {
          py::gil_scoped_release release;
          recs = generate_dataset(paths, es, jobs);
        }
        py::list out;
        for (const auto& r : recs) out.append(record_to_dict(r));
        return out;
      },
      "Runs generated paths through a micro-structure ensemble; returns a list of record dicts",
      py::arg("n_random"), py::arg("n_cyclic") = 0, py::arg("d_gamma") = 50, py::arg("n_fiber") = 20,
      py::arg("seed") = 1, py::arg("delta_r") = 1e-2, py::arg("jobs") = 1);

  // datastore
  m.def("read_records", [](const std::filesystem::path& f) {
    py::list out;
    for (const auto& r : read_records(f)) out.append(record_to_dict(r));
    return out;
  });
  m.def("write_records", [](const std::filesystem::path& f, const py::list& recs) {
    std::vector<SequenceRecord> v;
    for (const auto& r : recs) v.push_back(record_from_dict(r.cast<py::dict>()));
    write_records(f, v);
  });
  m.def("pre_trim", [](const py::dict& rec, double crit, const std::string& family) {
    return record_to_dict(pre_trim(record_from_dict(rec), crit, family_from_string(family)));
  }, py::arg("record"), py::arg("crit") = 6.0, py::arg("family") = "gamma");
  m.def("pad_or_trim", [](const Array& a, std::size_t length) { return to_numpy(pad_or_trim(from_numpy(a), length)); });

  // PCA
  py::class_<PcaModel>(m, "PcaModel")
      .def_readonly("mean", &PcaModel::mean)
      .def_readonly("components", &PcaModel::components)
      .def_readonly("eigenvalues", &PcaModel::eigenvalues)
      .def_readonly("retained_p", &PcaModel::retained_p)
      .def_property_readonly("dim", &PcaModel::dim)
      .def("project", [](const PcaModel& p, const std::vector<double>& x) { return p.project(x); })
      .def("reconstruct", [](const PcaModel& p, const std::vector<double>& xi) { return p.reconstruct(xi); })
      .def("truncated", &PcaModel::truncated)
      .def("residual_fraction", [](const PcaModel& p, int k) { return residual_fraction(p, k); });
  m.def(
      "fit_pca",
      [](const Array& snapshots, std::optional<int> p, std::optional<double> delta, double subsample, std::uint64_t seed) {
        PcaFitOptions o;
        o.subsample_fraction = subsample;
        o.seed = seed;
        if (p) o.retention = Retention::fixed(*p);
        else if (delta) o.retention = Retention::tolerance(*delta);
        return fit_pca(from_numpy(snapshots), o);
      },
      "PCA of a (samples, d) snapshot array", py::arg("snapshots"), py::arg("p") = py::none(),
      py::arg("delta") = py::none(), py::arg("subsample") = 1.0, py::arg("seed") = 0);
  m.def("read_pca", &read_pca);
  m.def("write_pca", &write_pca);

  // neural
  m.def("gru_parameters", &gru_parameters, py::arg("n_hidden"), py::arg("n_in"));
  m.def("dense_pair_parameters", &dense_pair_parameters, py::arg("n_i"), py::arg("n_next"));
  m.def(
      "rnn_parameter_count",
      [](std::vector<int> nnw_in, int n_hidden, std::vector<int> nnw_out) {
        RnnArchitecture a;
        a.nnw_in = std::move(nnw_in);
        a.n_hidden = n_hidden;
        a.nnw_out = std::move(nnw_out);
        return make_rnn(a).count_parameters();
      },
      "Allocated parameter count of NNW_I -> GRU -> NNW_O", py::arg("nnw_in"), py::arg("n_hidden"), py::arg("nnw_out"));

  // surrogate
  m.def("group_ranges", [](int p, int q) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& g : group_ranges(p, q)) out.emplace_back(g.begin, g.end);
    return out;
  });
  m.def("split_outputs", [](const std::vector<double>& x, int q) { return split_outputs(x, q); });

  py::class_<SurrogateBundle>(m, "SurrogateBundle")
      .def_property_readonly("kind", [](const SurrogateBundle& b) { return to_string(b.kind); })
      .def_property_readonly("family", [](const SurrogateBundle& b) { return to_string(b.family); })
      .def_readonly("field_dim", &SurrogateBundle::field_dim)
      .def_readonly("trained", &SurrogateBundle::trained)
      .def_property_readonly("q", [](const SurrogateBundle& b) { return b.rnns.size(); })
      .def("count_parameters", &SurrogateBundle::count_parameters)
      .def("predict", [](const SurrogateBundle& b, const Array& strain_inputs) {
        const FieldPrediction p = predict_fields(b, from_numpy(strain_inputs));
        return py::make_tuple(to_numpy(p.fields), to_numpy(p.normalized));
      }, "Fields for a (steps, 3) array of (E_xx, E_yy, E_xy); returns (physical, normalized)");
  m.def("read_bundle", &read_bundle);
  m.def("evaluate", [](const SurrogateBundle& b, const py::list& recs) {
    std::vector<SequenceRecord> v;
    for (const auto& r : recs) v.push_back(record_from_dict(r.cast<py::dict>()));
    const EvaluationReport rep = evaluate(b, v);
    std::vector<double> per;
    for (const auto& s : rep.sequences) per.push_back(s.mse);
    return py::make_tuple(rep.mse_full_dim, per);
  }, "Returns (mse_full_dim, per-sequence MSE)");

  // pipeline
  m.def(
      "run_stage",
      [](const std::filesystem::path& config, const std::string& stage, std::optional<std::filesystem::path> root,
         int jobs) {
        RunContext ctx;
        ctx.config = load_config(config);
        ctx.root = root ? *root : resolve_output_root(ctx.config);
        ctx.jobs = jobs;
        std::ostringstream log;
        ctx.log = &log;
        {
          py::gil_scoped_release release;
          run_stage(ctx, stage);
        }
        return log.str();
      },
      "Runs one pipeline stage (or \"all\"); returns the stage log", py::arg("config"), py::arg("stage"),
      py::arg("root") = py::none(), py::arg("jobs") = 1);
  m.def("stage_names", &stage_names);
}
