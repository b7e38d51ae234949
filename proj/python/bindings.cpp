#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "qspin/cli.hpp"
#include "qspin/error.hpp"
#include "qspin/harness.hpp"
#include "qspin/rng.hpp"

namespace py = pybind11;
using namespace qspin;

namespace {

BoxWindow window(int dim, double side, const std::string& boundary) {
  return BoxWindow{dim, side, parse_boundary_mode(boundary)};
}

py::array_t<double> to_array(const PointConfiguration& pc) {
  const auto n = static_cast<py::ssize_t>(pc.points.size());
  py::array_t<double> out({n, static_cast<py::ssize_t>(pc.window.dim)});
  auto a = out.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < n; ++i)
    for (int k = 0; k < pc.window.dim; ++k) a(i, k) = pc.points[i][k];
  return out;
}

PointConfiguration from_array(py::array_t<double, py::array::c_style | py::array::forcecast> pts, double side,
                              const std::string& boundary) {
  if (pts.ndim() != 2 || (pts.shape(1) != 2 && pts.shape(1) != 3))
    throw InvalidParameter("points must be an (n, 2) or (n, 3) array");
  PointConfiguration pc;
  pc.window = window(static_cast<int>(pts.shape(1)), side, boundary);
  auto a = pts.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    Vec v{0, 0, 0};
    for (py::ssize_t k = 0; k < a.shape(1); ++k) v[k] = a(i, k);
    pc.points.push_back(v);
  }
  return pc;
}

py::array_t<std::uint32_t> edge_array(const GilbertGraph& g) {
  const auto e = g.edges();
  py::array_t<std::uint32_t> out({static_cast<py::ssize_t>(e.size()), py::ssize_t{2}});
  auto a = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < e.size(); ++i) {
    a(i, 0) = e[i].first;
    a(i, 1) = e[i].second;
  }
  return out;
}

py::dict threshold_dict(const ThresholdEstimate& est) {
  py::dict d;
  d["parameter"] = est.parameter_name;
  d["estimate"] = est.estimate;
  d["ci_low"] = est.ci_low;
  d["ci_high"] = est.ci_high;
  d["pair_crossings"] = est.pair_crossings;
  d["sizes"] = est.sizes;
  d["grid"] = est.grid;
  py::list curves;
  for (const auto& c : est.curves) {
    py::dict p;
    p["L"] = c.side;
    p["param"] = c.param;
    p["spanning_prob"] = c.spanning_prob;
    p["replicates"] = c.replicates;
    p["se"] = c.se;
    curves.append(p);
  }
  d["curves"] = curves;
  return d;
}

}  // namespace

PYBIND11_MODULE(_qspin, m) {
  m.doc() = "Quenched spin systems on random geometric graphs";

  py::register_exception<InvalidParameter>(m, "InvalidParameter", PyExc_ValueError);
  py::register_exception<Unsupported>(m, "Unsupported", PyExc_NotImplementedError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);
  py::register_exception<NoCrossingError>(m, "NoCrossingError", PyExc_RuntimeError);

  m.attr("artifact_version") = kArtifactVersion;

  m.def("derive_seed", [](std::uint64_t master, std::vector<std::uint64_t> coords) {
    return derive_seed(master, std::span<const std::uint64_t>(coords));
  }, py::arg("master"), py::arg("coords"));

  m.def("sample_poisson", [](double lam, int dim, double side, const std::string& boundary, std::uint64_t seed,
                             std::uint64_t replicate) {
    return to_array(sample_poisson(lam, window(dim, side, boundary), seed, replicate));
  }, py::arg("lam"), py::arg("dim") = 2, py::arg("side") = 10.0, py::arg("boundary") = "free", py::arg("seed") = 0,
     py::arg("replicate") = 0);

  m.def("gilbert_edges", [](py::array_t<double, py::array::c_style | py::array::forcecast> pts, double side,
                            double r_star, const std::string& boundary) {
    return edge_array(build_graph(from_array(pts, side, boundary), r_star));
  }, py::arg("points"), py::arg("side"), py::arg("r_star"), py::arg("boundary") = "free",
     "Edges (i, j), i < j, as an (m, 2) array");

  m.def("sparsity", [](py::array_t<double, py::array::c_style | py::array::forcecast> pts, double side, double r_star,
                       double alpha, double theta) {
    const auto s = sparsity_functionals(build_graph(from_array(pts, side, "free"), r_star), alpha, theta);
    py::dict d;
    d["a_gamma"] = s.a_gamma;
    d["b_gamma"] = s.b_gamma;
    d["max_degree"] = s.max_degree;
    d["mean_degree"] = s.mean_degree;
    return d;
  }, py::arg("points"), py::arg("side"), py::arg("r_star"), py::arg("alpha") = 1.0, py::arg("theta") = 1.0);

  m.def("expected_a_bound", &expected_a_bound, py::arg("lam"), py::arg("alpha"), py::arg("theta"), py::arg("r_star"),
        py::arg("dim") = 2);

  m.def("estimate_lambda_star", [](double r_star, int dim, std::vector<double> sizes, std::vector<double> grid,
                                   std::size_t replicates, std::uint64_t seed, std::size_t bootstrap, unsigned threads) {
    ThresholdOptions opt;
    opt.bootstrap = bootstrap;
    opt.threads = threads;
    ThresholdEstimate est;
    {
      py::gil_scoped_release release;
      est = estimate_lambda_star(r_star, dim, sizes, grid, replicates, seed, opt);
    }
    return threshold_dict(est);
  }, py::arg("r_star"), py::arg("dim"), py::arg("sizes"), py::arg("grid"), py::arg("replicates"),
     py::arg("seed") = 0, py::arg("bootstrap") = 200, py::arg("threads") = 0);

  m.def("q_star_bound", &compute_q_star_bound, py::arg("lam"), py::arg("lambda_star"));
  m.def("beta_star_bound", &beta_star_bound, py::arg("q"), py::arg("phi_star"), py::arg("a"));

  m.def("find_a", [](const std::string& measure) {
    const auto f = find_a(SingleSpinMeasure::parse(measure));
    return py::make_tuple(f.a, f.attained, f.usable());
  }, py::arg("measure"), "(supremum, attained, usable value)");

  m.def("one_site_integral", [](const std::string& measure, double a, int p, int q) {
    return one_site_integral(SingleSpinMeasure::parse(measure), a, p, q);
  }, py::arg("measure"), py::arg("a"), py::arg("p"), py::arg("q"));

  m.def("positivity_certificate", [](const std::string& measure, double a, int max_exponent) {
    return certificate_json(verify_one_site_positivity(SingleSpinMeasure::parse(measure), a, max_exponent));
  }, py::arg("measure"), py::arg("a"), py::arg("max_exponent") = 8, "Certificate as a JSON string");

  m.def("run_experiment", [](const std::string& config_text, const std::string& output_dir, unsigned threads) {
    const auto config = ExperimentConfig::from_text(config_text);
    RunManifest man;
    {
      py::gil_scoped_release release;
      man = run_experiment(config, output_dir, threads);
    }
    return man.to_json();
  }, py::arg("config_text"), py::arg("output_dir"), py::arg("threads") = 0, "Manifest as a JSON string");

  m.def("check_outputs", &check_outputs, py::arg("output_dir"));

  m.def("cli", [](std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "(exit code, stdout, stderr) of the command-line tool");
}
