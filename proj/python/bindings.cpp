#include <pybind11/numpy.h>

#include <cstring>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qmfg/cli_io.hpp"
#include "qmfg/model.hpp"
#include "qmfg/population_sim.hpp"
#include "qmfg/quantiles.hpp"
#include "qmfg/target_mfg.hpp"
#include "qmfg/threshold_mfg.hpp"

namespace py = pybind11;
using namespace qmfg;

namespace {

py::array_t<double> to_array(const double* data, std::size_t size) {
  py::array_t<double> out(static_cast<py::ssize_t>(size));
  std::memcpy(out.mutable_data(), data, size * sizeof(double));
  return out;
}

py::array_t<double> to_array(const std::vector<double>& v) { return to_array(v.data(), v.size()); }

std::vector<double> from_sequence(const py::sequence& seq) {
  std::vector<double> out;
  out.reserve(py::len(seq));
  for (auto item : seq) out.push_back(item.cast<double>());
  return out;
}

Formulation parse_formulation(const std::string& name) {
  if (name == "target") return Formulation::target;
  if (name == "threshold") return Formulation::threshold;
  throw ConfigError("formulation must be `target` or `threshold`, got " + name);
}

ThresholdSolution solve_threshold_py(const RunConfig& config, int n_cells, double delta, double rho,
                                     int max_iterations, std::optional<double> initial_q) {
  const FbodeSolution target = solve_fbode(config);
  const SpatialGrid grid = SpatialGrid::cover(config, target.qbar.back(), n_cells);
  FixedPointConfig fp;
  fp.delta = delta;
  fp.rho = rho;
  fp.max_iterations = max_iterations;
  return fixed_point_solve(config, fp, grid, initial_q);
}

PopulationRun simulate_py(const RunConfig& config, const std::string& formulation, bool store_paths,
                          std::uint32_t replication, int n_cells) {
  SimOptions opts;
  opts.store_paths = store_paths;
  opts.replication = replication;
  opts.policy_tag = formulation;
  if (parse_formulation(formulation) == Formulation::target) {
    const FbodeSolution sol = solve_fbode(config);
    return simulate_population(config, TargetPolicy(sol, config.time_grid()), opts);
  }
  const ThresholdSolution sol = solve_threshold_py(config, n_cells, 1e-4, 0.5, 50, std::nullopt);
  return simulate_population(config, ThresholdPolicy(sol.policy, config.time_grid()), opts);
}

}  // namespace

PYBIND11_MODULE(_qmfg, m) {
  m.doc() = "Ranking quantile mean-field games: solvers and population simulation";

  py::register_exception<ValidationError>(m, "ValidationFailure", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigFailure", PyExc_ValueError);
  py::register_exception<AlphaOutOfRange>(m, "AlphaOutOfRangeFailure", PyExc_ValueError);
  py::register_exception<NoConvergence>(m, "NoConvergenceFailure", PyExc_RuntimeError);

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_property(
          "b", [](const RunConfig& c) { return c.params.b; },
          [](RunConfig& c, double v) { c.params.b = v; })
      .def_property(
          "sigma", [](const RunConfig& c) { return c.params.sigma; },
          [](RunConfig& c, double v) { c.params.sigma = v; })
      .def_property(
          "r", [](const RunConfig& c) { return c.params.r; },
          [](RunConfig& c, double v) { c.params.r = v; })
      .def_property(
          "lambda_", [](const RunConfig& c) { return c.params.lambda; },
          [](RunConfig& c, double v) { c.params.lambda = v; })
      .def_property(
          "T", [](const RunConfig& c) { return c.params.T; },
          [](RunConfig& c, double v) { c.params.T = v; })
      .def_property(
          "m0", [](const RunConfig& c) { return c.params.m0; },
          [](RunConfig& c, double v) { c.params.m0 = v; })
      .def_property(
          "nu", [](const RunConfig& c) { return c.params.nu; },
          [](RunConfig& c, double v) { c.params.nu = v; })
      .def_property(
          "alpha", [](const RunConfig& c) { return c.alpha.alpha; },
          [](RunConfig& c, double v) { c.alpha.alpha = v; })
      .def_readwrite("n_steps", &RunConfig::n_steps)
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("n_agents", &RunConfig::n_agents)
      .def_readwrite("n_replications", &RunConfig::n_replications)
      .def("set_gamma_constant",
           [](RunConfig& c, double v) { c.params.gamma = GammaSchedule::constant(v); })
      .def("set_gamma_table",
           [](RunConfig& c, std::vector<double> times, std::vector<double> values) {
             c.params.gamma = GammaSchedule::piecewise(std::move(times), std::move(values));
           })
      .def("gamma", [](const RunConfig& c, double t) { return c.params.gamma(t); })
      .def("__repr__", [](const RunConfig& c) {
        return "<RunConfig " + config_to_text(c) + ">";
      });

  m.def("table1_defaults", &table1_defaults, "Documented default configuration");
  m.def("load_config", &load_config_file, py::arg("path"));
  m.def("validate", [](const RunConfig& c) {
    std::vector<std::string> issues;
    for (const auto& issue : validate(c)) issues.push_back(issue.message);
    return issues;
  });

  m.def("std_normal_quantile", &std_normal_quantile, py::arg("alpha"));
  m.def("gaussian_quantile", &gaussian_quantile, py::arg("mean"), py::arg("variance"),
        py::arg("alpha"));
  m.def(
      "empirical_quantile",
      [](const py::sequence& values, double alpha) {
        const auto v = from_sequence(values);
        return empirical_quantile(v, alpha);
      },
      py::arg("values"), py::arg("alpha"));
  m.def(
      "grid_quantile",
      [](const py::sequence& x, const py::sequence& mass, double alpha) {
        return grid_quantile(GriddedLaw{from_sequence(x), from_sequence(mass)}, alpha);
      },
      py::arg("x"), py::arg("mass"), py::arg("alpha"));
  m.def("terminal_cost", &terminal_cost, py::arg("x"), py::arg("q"), py::arg("lam"));

  py::class_<FbodeSolution>(m, "FbodeSolution")
      .def_property_readonly("t", [](const FbodeSolution& s) { return to_array(s.t); })
      .def_property_readonly("eta", [](const FbodeSolution& s) { return to_array(s.eta); })
      .def_property_readonly("pi", [](const FbodeSolution& s) { return to_array(s.pi); })
      .def_property_readonly("v", [](const FbodeSolution& s) { return to_array(s.v); })
      .def_property_readonly("phi", [](const FbodeSolution& s) { return to_array(s.phi); })
      .def_property_readonly("qbar", [](const FbodeSolution& s) { return to_array(s.qbar); })
      .def_property_readonly("m", [](const FbodeSolution& s) { return to_array(s.m); })
      .def_property_readonly("theta", [](const FbodeSolution& s) { return to_array(s.theta); })
      .def_property_readonly("x_alpha", [](const FbodeSolution& s) { return s.x_alpha; })
      .def("policy", &equilibrium_policy, py::arg("t"), py::arg("x"))
      .def("density_moments", &equilibrium_density, py::arg("t"))
      .def("density_value", &equilibrium_density_value, py::arg("t"), py::arg("y"));

  m.def("solve_fbode", &solve_fbode, py::arg("config"));
  m.def(
      "nash_error_estimate",
      [](const FbodeSolution& sol, const RunConfig& config, int n) {
        return nash_error_estimate(sol, config, n);
      },
      py::arg("solution"), py::arg("config"), py::arg("n_agents"));
  m.def("limiting_cost", &limiting_cost, py::arg("solution"), py::arg("config"));

  py::class_<FixedPointIteration>(m, "FixedPointIteration")
      .def_readonly("index", &FixedPointIteration::index)
      .def_readonly("q_candidate", &FixedPointIteration::q_candidate)
      .def_readonly("mapped_quantile", &FixedPointIteration::mapped_quantile)
      .def_readonly("residual", &FixedPointIteration::residual);

  py::class_<ThresholdSolution>(m, "ThresholdSolution")
      .def_readonly("q_T", &ThresholdSolution::q_T)
      .def_readonly("iterations", &ThresholdSolution::iterations)
      .def_readonly("trace", &ThresholdSolution::trace)
      .def_property_readonly("qbar", [](const ThresholdSolution& s) { return to_array(s.qbar); })
      .def_property_readonly("x_centers",
                             [](const ThresholdSolution& s) {
                               std::vector<double> x(s.policy.space_grid.n_cells);
                               for (int j = 0; j < s.policy.space_grid.n_cells; ++j)
                                 x[j] = s.policy.space_grid.center(j);
                               return to_array(x);
                             })
      .def("policy", [](const ThresholdSolution& s, double t, double x) { return s.policy.value(t, x); },
           py::arg("t"), py::arg("x"))
      .def("density_slice", [](const ThresholdSolution& s, int k) {
        if (k < 0 || k > s.density.time_grid.n_steps) throw Error("slice index out of range");
        return to_array(s.density.slice(k), static_cast<std::size_t>(s.density.space_grid.n_cells));
      });

  m.def("solve_threshold", &solve_threshold_py, py::arg("config"), py::arg("n_cells") = 1024,
        py::arg("delta") = 1e-4, py::arg("rho") = 0.5, py::arg("max_iterations") = 50,
        py::arg("initial_q") = std::nullopt);

  py::class_<PopulationRun>(m, "PopulationRun")
      .def_property_readonly("terminal_states",
                             [](const PopulationRun& r) { return to_array(r.terminal_states); })
      .def_property_readonly("running_cost",
                             [](const PopulationRun& r) { return to_array(r.running_cost); })
      .def_readonly("sample_quantile_T", &PopulationRun::sample_quantile_T)
      .def_readonly("seed", &PopulationRun::seed)
      .def_readonly("replication", &PopulationRun::replication)
      .def_readonly("policy_tag", &PopulationRun::policy_tag);

  m.def("simulate", &simulate_py, py::arg("config"), py::arg("formulation") = "target",
        py::arg("store_paths") = false, py::arg("replication") = 0, py::arg("n_cells") = 1024);

  py::class_<CltReport>(m, "CltReport")
      .def_readonly("n_replications", &CltReport::n_replications)
      .def_readonly("n_agents", &CltReport::n_agents)
      .def_readonly("qbar_T", &CltReport::qbar_T)
      .def_readonly("mean_quantile", &CltReport::mean_quantile)
      .def_readonly("sd_quantile", &CltReport::sd_quantile)
      .def_readonly("standard_error", &CltReport::standard_error)
      .def_readonly("z_score", &CltReport::z_score)
      .def_readonly("predicted_sd_classical", &CltReport::predicted_sd_classical)
      .def_readonly("predicted_sd_paper", &CltReport::predicted_sd_paper)
      .def_property_readonly("closer_scaling",
                             [](const CltReport& r) { return std::string(r.closer_scaling); })
      .def_property_readonly("quantiles", [](const CltReport& r) { return to_array(r.quantiles); });

  m.def(
      "clt_check",
      [](const RunConfig& config) {
        const FbodeSolution sol = solve_fbode(config);
        const double qbar_T = sol.qbar.back();
        const double p_at_q = equilibrium_density_value(sol, config.params.T, qbar_T);
        return clt_experiment(config, TargetPolicy(sol, config.time_grid()), qbar_T, p_at_q);
      },
      py::arg("config"));

  py::class_<NashGapPoint>(m, "NashGapPoint")
      .def_readonly("n_agents", &NashGapPoint::n_agents)
      .def_readonly("replications", &NashGapPoint::replications)
      .def_readonly("mean_cost", &NashGapPoint::mean_cost)
      .def_readonly("cost_se", &NashGapPoint::cost_se)
      .def_readonly("gap", &NashGapPoint::gap)
      .def_readonly("mean_quantile", &NashGapPoint::mean_quantile)
      .def_readonly("sd_quantile", &NashGapPoint::sd_quantile);

  py::class_<NashGapReport>(m, "NashGapReport")
      .def_readonly("limiting_cost", &NashGapReport::limiting_cost)
      .def_readonly("points", &NashGapReport::points)
      .def_readonly("gap_slope", &NashGapReport::gap_slope)
      .def_readonly("sd_slope", &NashGapReport::sd_slope);

  m.def(
      "nash_check",
      [](const RunConfig& config, std::vector<int> n_values) {
        const FbodeSolution sol = solve_fbode(config);
        return nash_gap_experiment(config, TargetPolicy(sol, config.time_grid()), n_values,
                                   limiting_cost(sol, config));
      },
      py::arg("config"), py::arg("n_values"));

  m.attr("__version__") = "0.1.0";
}
