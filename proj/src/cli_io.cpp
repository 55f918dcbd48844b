#include "qmfg/cli_io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace qmfg {

namespace fs = std::filesystem;

const char* command_name(Command c) {
  switch (c) {
    case Command::solve_target: return "solve-target";
    case Command::solve_threshold: return "solve-threshold";
    case Command::simulate: return "simulate";
    case Command::clt_check: return "clt-check";
    case Command::nash_check: return "nash-check";
    case Command::sweep_alpha: return "sweep-alpha";
    case Command::compare_formulations: return "compare-formulations";
  }
  return "?";
}

std::string fnv1a_hex(const std::string& content) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : content) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Everything that determines the outputs, in a stable order; the artifact
// directory name is the hash of this block.
std::string spec_text(const ExperimentSpec& spec) {
  std::ostringstream os;
  os << "command = " << command_name(spec.command) << "\n";
  os << config_to_text(spec.config);
  os << "n_cells = " << spec.n_cells << "\n";
  os << "fp_delta = " << fmt(spec.fixed_point.delta) << "\n";
  os << "fp_rho = " << fmt(spec.fixed_point.rho) << "\n";
  os << "fp_max_iterations = " << spec.fixed_point.max_iterations << "\n";
  os << "rng = " << rng_id() << "\n";
  if (!spec.alpha_list.empty()) {
    os << "alpha_list =";
    for (double a : spec.alpha_list) os << " " << fmt(a);
    os << "\n";
  }
  if (spec.command == Command::nash_check) {
    os << "n_list =";
    for (int n : spec.n_list) os << " " << n;
    os << "\n";
  }
  if (spec.formulation) os << "formulation = " << formulation_name(*spec.formulation) << "\n";
  return os.str();
}

class ArtifactWriter {
 public:
  explicit ArtifactWriter(const ExperimentSpec& spec)
      : spec_(spec), dir_(artifact_dir(spec)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_.string());
  }

  const fs::path& dir() const { return dir_; }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw IoError("cannot open " + (dir_ / name).string() + " for writing");
    out << content;
    if (!out) throw IoError("failed writing " + name);
    hashes_[name] = fnv1a_hex(content);
  }

  void summary(const std::map<std::string, std::string>& lines) {
    std::ostringstream os;
    for (const auto& [k, v] : lines) os << k << " = " << v << "\n";
    write("summary.txt", os.str());
  }

  // manifest last: it records the content hash of every artifact
  void finish() {
    std::ostringstream os;
    os << spec_text(spec_);
    for (const auto& [name, hash] : hashes_) os << "artifact." << name << ".fnv1a64 = " << hash << "\n";
    std::ofstream out(dir_ / "manifest.txt", std::ios::binary);
    if (!out) throw IoError("cannot write manifest");
    out << os.str();
  }

 private:
  ExperimentSpec spec_;
  fs::path dir_;
  std::map<std::string, std::string> hashes_;
};

std::string fbode_csv(const FbodeSolution& sol) {
  std::ostringstream os;
  os << "t,eta,pi,v,phi,qbar,m\n";
  for (std::size_t k = 0; k < sol.t.size(); ++k) {
    os << fmt(sol.t[k]) << ',' << fmt(sol.eta[k]) << ',' << fmt(sol.pi[k]) << ',' << fmt(sol.v[k])
       << ',' << fmt(sol.phi[k]) << ',' << fmt(sol.qbar[k]) << ',' << fmt(sol.m[k]) << "\n";
  }
  return os.str();
}

std::string trace_csv(const std::vector<FixedPointIteration>& trace) {
  std::ostringstream os;
  os << "iteration,q_T,mapped_quantile,residual\n";
  for (const auto& it : trace)
    os << it.index << ',' << fmt(it.q_candidate) << ',' << fmt(it.mapped_quantile) << ','
       << fmt(it.residual) << "\n";
  return os.str();
}

std::string policy_csv(const PolicyGrid& policy) {
  std::ostringstream os;
  os << "t,x,u\n";
  for (int k = 0; k <= policy.time_grid.n_steps; ++k) {
    const double t = policy.time_grid.time(k);
    for (int j = 0; j < policy.space_grid.n_cells; ++j)
      os << fmt(t) << ',' << fmt(policy.space_grid.center(j)) << ',' << fmt(policy.at(k, j)) << "\n";
  }
  return os.str();
}

std::string density_csv(const DensityGrid& density) {
  std::ostringstream os;
  os << "t,x,p\n";
  for (int k = 0; k <= density.time_grid.n_steps; ++k) {
    const double t = density.time_grid.time(k);
    const double* row = density.slice(k);
    for (int j = 0; j < density.space_grid.n_cells; ++j)
      os << fmt(t) << ',' << fmt(density.space_grid.center(j)) << ',' << fmt(row[j]) << "\n";
  }
  return os.str();
}

std::string qbar_csv(const TimeGrid& grid, const std::vector<double>& qbar) {
  std::ostringstream os;
  os << "t,qbar\n";
  for (std::size_t k = 0; k < qbar.size(); ++k) os << fmt(grid.time(static_cast<int>(k))) << ',' << fmt(qbar[k]) << "\n";
  return os.str();
}

std::string agents_csv(const PopulationRun& run) {
  std::ostringstream os;
  os << "agent,x_T,selected\n";
  for (std::size_t i = 0; i < run.terminal_states.size(); ++i)
    os << i << ',' << fmt(run.terminal_states[i]) << ','
       << (run.terminal_states[i] >= run.sample_quantile_T ? 1 : 0) << "\n";
  return os.str();
}

std::string replications_csv(const CltReport& report) {
  std::ostringstream os;
  os << "replication,N,sample_quantile_T\n";
  for (std::size_t j = 0; j < report.quantiles.size(); ++j)
    os << j << ',' << report.n_agents << ',' << fmt(report.quantiles[j]) << "\n";
  return os.str();
}

std::string rate_csv(const NashGapReport& report) {
  std::ostringstream os;
  os << "N,replications,mean_quantile,sd_quantile,mean_cost,cost_se,gap\n";
  for (const auto& pt : report.points)
    os << pt.n_agents << ',' << pt.replications << ',' << fmt(pt.mean_quantile) << ','
       << fmt(pt.sd_quantile) << ',' << fmt(pt.mean_cost) << ',' << fmt(pt.cost_se) << ','
       << fmt(pt.gap) << "\n";
  return os.str();
}

ThresholdSolution solve_threshold_pipeline(const ExperimentSpec& spec, const RunConfig& config,
                                           double* target_qT_out = nullptr) {
  const FbodeSolution target = solve_fbode(config);
  if (target_qT_out) *target_qT_out = target.qbar.back();
  const SpatialGrid grid = SpatialGrid::cover(config, target.qbar.back(), spec.n_cells);
  return fixed_point_solve(config, spec.fixed_point, grid);
}

int run_solve_target(const ExperimentSpec& spec, ArtifactWriter& out) {
  const FbodeSolution sol = solve_fbode(spec.config);
  out.write("fbode_paths.csv", fbode_csv(sol));
  const double p_T = equilibrium_density_value(sol, spec.config.params.T, sol.qbar.back());
  out.summary({{"qbar_T", fmt(sol.qbar.back())},
               {"qbar_0", fmt(sol.qbar.front())},
               {"m_T", fmt(sol.m.back())},
               {"v_T", fmt(sol.v.back())},
               {"eta_0", fmt(sol.eta.front())},
               {"density_at_qbar_T", fmt(p_T)},
               {"nash_error_estimate", fmt(nash_error_estimate(sol, spec.config, spec.config.n_agents))}});
  return 0;
}

int run_solve_threshold(const ExperimentSpec& spec, ArtifactWriter& out) {
  double target_qT = 0.0;
  const ThresholdSolution sol = solve_threshold_pipeline(spec, spec.config, &target_qT);
  out.write("iteration_trace.csv", trace_csv(sol.trace));
  out.write("policy_grid.csv", policy_csv(sol.policy));
  out.write("density_grid.csv", density_csv(sol.density));
  out.write("qbar_path.csv", qbar_csv(sol.density.time_grid, sol.qbar));
  std::map<std::string, std::string> summary{
      {"q_T", fmt(sol.q_T)},
      {"iterations", std::to_string(sol.iterations)},
      {"final_residual", fmt(sol.trace.back().residual)},
      {"target_qbar_T", fmt(target_qT)},
      {"relative_difference_vs_target", fmt(std::fabs(sol.q_T - target_qT) / std::fabs(target_qT))},
      {"max_mass_correction", fmt(sol.density.max_renorm_correction)}};
  if (sol.density.max_renorm_correction > 1e-8)
    summary["mass_correction_warning"] = "renormalization exceeded 1e-8";
  out.summary(summary);
  return 0;
}

int run_simulate(const ExperimentSpec& spec, ArtifactWriter& out) {
  const RunConfig& config = spec.config;
  const Formulation f = spec.formulation.value_or(Formulation::target);
  PopulationRun run;
  if (f == Formulation::target) {
    const FbodeSolution sol = solve_fbode(config);
    SimOptions opts;
    opts.policy_tag = "target";
    run = simulate_population(config, TargetPolicy(sol, config.time_grid()), opts);
  } else {
    const ThresholdSolution sol = solve_threshold_pipeline(spec, config);
    SimOptions opts;
    opts.policy_tag = "threshold";
    run = simulate_population(config, ThresholdPolicy(sol.policy, config.time_grid()), opts);
  }
  out.write("agents.csv", agents_csv(run));
  int selected = 0;
  for (double x : run.terminal_states)
    if (x >= run.sample_quantile_T) ++selected;
  out.summary({{"sample_quantile_T", fmt(run.sample_quantile_T)},
               {"selected_agents", std::to_string(selected)},
               {"n_agents", std::to_string(config.n_agents)},
               {"policy", run.policy_tag}});
  return 0;
}

int run_clt_check(const ExperimentSpec& spec, ArtifactWriter& out) {
  const RunConfig& config = spec.config;
  const FbodeSolution sol = solve_fbode(config);
  const double qbar_T = sol.qbar.back();
  const double p_at_q = equilibrium_density_value(sol, config.params.T, qbar_T);
  const CltReport report =
      clt_experiment(config, TargetPolicy(sol, config.time_grid()), qbar_T, p_at_q);
  out.write("replications.csv", replications_csv(report));
  out.summary({{"mean_sample_quantile", fmt(report.mean_quantile)},
               {"sd_sample_quantile", fmt(report.sd_quantile)},
               {"qbar_T", fmt(qbar_T)},
               {"z_score", fmt(report.z_score)},
               {"predicted_sd_classical", fmt(report.predicted_sd_classical)},
               {"predicted_sd_paper_literal", fmt(report.predicted_sd_paper)},
               {"closer_scaling", report.closer_scaling},
               {"replications", std::to_string(report.n_replications)}});
  return 0;
}

int run_nash_check(const ExperimentSpec& spec, ArtifactWriter& out) {
  const RunConfig& config = spec.config;
  const FbodeSolution sol = solve_fbode(config);
  const NashGapReport report = nash_gap_experiment(
      config, TargetPolicy(sol, config.time_grid()), spec.n_list, limiting_cost(sol, config));
  out.write("rate.csv", rate_csv(report));
  out.summary({{"limiting_cost", fmt(report.limiting_cost)},
               {"sd_loglog_slope", fmt(report.sd_slope)},
               {"gap_loglog_slope", fmt(report.gap_slope)}});
  return 0;
}

int run_sweep_alpha(const ExperimentSpec& spec, ArtifactWriter& out) {
  std::vector<double> alphas = spec.alpha_list;
  if (alphas.empty()) alphas = {0.25, 0.5, 0.75, 0.9, 0.95};
  const bool do_target = !spec.formulation || *spec.formulation == Formulation::target;
  const bool do_threshold = !spec.formulation || *spec.formulation == Formulation::threshold;

  std::ostringstream sweep, paths;
  sweep << "formulation,alpha,qbar_T\n";
  paths << "formulation,alpha,t,qbar\n";
  bool target_monotone = true, threshold_monotone = true;
  double prev_target = 0.0, prev_threshold = 0.0;
  bool first_target = true, first_threshold = true;

  for (double a : alphas) {
    RunConfig config = spec.config;
    config.alpha.alpha = a;
    if (do_target) {
      const FbodeSolution sol = solve_fbode(config);
      sweep << "target," << fmt(a) << ',' << fmt(sol.qbar.back()) << "\n";
      for (std::size_t k = 0; k < sol.qbar.size(); ++k)
        paths << "target," << fmt(a) << ',' << fmt(sol.t[k]) << ',' << fmt(sol.qbar[k]) << "\n";
      if (!first_target && sol.qbar.back() <= prev_target) target_monotone = false;
      prev_target = sol.qbar.back();
      first_target = false;
    }
    if (do_threshold) {
      const ThresholdSolution sol = solve_threshold_pipeline(spec, config);
      sweep << "threshold," << fmt(a) << ',' << fmt(sol.q_T) << "\n";
      for (std::size_t k = 0; k < sol.qbar.size(); ++k)
        paths << "threshold," << fmt(a) << ',' << fmt(sol.density.time_grid.time(static_cast<int>(k)))
              << ',' << fmt(sol.qbar[k]) << "\n";
      if (!first_threshold && sol.q_T <= prev_threshold) threshold_monotone = false;
      prev_threshold = sol.q_T;
      first_threshold = false;
    }
  }
  out.write("sweep.csv", sweep.str());
  out.write("qbar_paths.csv", paths.str());
  std::map<std::string, std::string> summary;
  if (do_target) summary["target_qT_strictly_increasing"] = target_monotone ? "yes" : "no";
  if (do_threshold) summary["threshold_qT_strictly_increasing"] = threshold_monotone ? "yes" : "no";
  out.summary(summary);
  return 0;
}

int run_compare(const ExperimentSpec& spec, ArtifactWriter& out) {
  const RunConfig& config = spec.config;
  const FbodeSolution target = solve_fbode(config);
  const SpatialGrid grid = SpatialGrid::cover(config, target.qbar.back(), spec.n_cells);
  const ThresholdSolution threshold = fixed_point_solve(config, spec.fixed_point, grid);

  std::ostringstream os;
  os << "t,qbar_target,qbar_threshold\n";
  for (std::size_t k = 0; k < target.qbar.size(); ++k)
    os << fmt(target.t[k]) << ',' << fmt(target.qbar[k]) << ',' << fmt(threshold.qbar[k]) << "\n";
  out.write("qbar_both.csv", os.str());

  const double rel = std::fabs(threshold.q_T - target.qbar.back()) / std::fabs(target.qbar.back());
  out.summary({{"target_qbar_T", fmt(target.qbar.back())},
               {"threshold_q_T", fmt(threshold.q_T)},
               {"relative_difference", fmt(rel)},
               {"threshold_iterations", std::to_string(threshold.iterations)}});
  return 0;
}

}  // namespace

fs::path artifact_dir(const ExperimentSpec& spec) {
  return fs::path(spec.output_dir) / fnv1a_hex(spec_text(spec));
}

void write_fbode_csv(const FbodeSolution& solution, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string());
  out << fbode_csv(solution);
}

int run(const ExperimentSpec& spec) {
  try {
    ArtifactWriter out(spec);
    int rc = 1;
    switch (spec.command) {
      case Command::solve_target: rc = run_solve_target(spec, out); break;
      case Command::solve_threshold: rc = run_solve_threshold(spec, out); break;
      case Command::simulate: rc = run_simulate(spec, out); break;
      case Command::clt_check: rc = run_clt_check(spec, out); break;
      case Command::nash_check: rc = run_nash_check(spec, out); break;
      case Command::sweep_alpha: rc = run_sweep_alpha(spec, out); break;
      case Command::compare_formulations: rc = run_compare(spec, out); break;
    }
    out.finish();
    std::cout << "artifacts: " << out.dir().string() << "\n";
    return rc;
  } catch (const ValidationError& e) {
    std::cerr << "config error [model]: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NoConvergence& e) {
    std::cerr << "solver error [threshold]: " << e.what() << "\n";
    for (const auto& it : e.trace())
      std::cerr << "  iteration " << it.index << ": q=" << it.q_candidate
                << " mapped=" << it.mapped_quantile << " residual=" << it.residual << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 3;
  }
}

int main_cli(int argc, char** argv) {
  CLI::App app{"Solver and simulation toolkit for ranking quantile mean-field games"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::optional<double> alpha;
  std::string alphas_arg, agents_arg;
  std::optional<int> reps;
  std::optional<std::uint64_t> seed;
  std::string formulation_arg;

  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--out", out_dir, "output directory (artifacts land in <out>/<manifest-hash>/)");
  app.add_option("--alpha", alpha, "quantile level in (0,1)");
  app.add_option("--alphas", alphas_arg, "comma-separated quantile levels for sweeps");
  app.add_option("--agents", agents_arg, "population size N (comma-separated list for nash-check)");
  app.add_option("--reps", reps, "Monte Carlo replications");
  app.add_option("--seed", seed, "base seed of the counter-based noise streams");
  app.add_option("--formulation", formulation_arg, "target | threshold");

  std::map<std::string, Command> commands = {
      {"solve-target", Command::solve_target},
      {"solve-threshold", Command::solve_threshold},
      {"simulate", Command::simulate},
      {"clt-check", Command::clt_check},
      {"nash-check", Command::nash_check},
      {"sweep-alpha", Command::sweep_alpha},
      {"compare-formulations", Command::compare_formulations},
  };
  for (auto& [name, _] : commands) app.add_subcommand(name)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  ExperimentSpec spec;
  try {
    spec.command = commands.at(app.get_subcommands().front()->get_name());
    spec.config = config_path.empty() ? table1_defaults() : load_config_file(config_path);
    spec.output_dir = out_dir;
    if (alpha) spec.config.alpha.alpha = *alpha;
    if (reps) spec.config.n_replications = *reps;
    if (seed) spec.config.seed = *seed;
    auto parse_list = [](const std::string& s) {
      std::vector<double> out;
      std::istringstream is(s);
      std::string item;
      while (std::getline(is, item, ',')) out.push_back(std::stod(item));
      return out;
    };
    if (!alphas_arg.empty()) {
      spec.alpha_list = parse_list(alphas_arg);
      for (std::size_t i = 0; i < spec.alpha_list.size(); ++i) {
        if (!(spec.alpha_list[i] > 0.0 && spec.alpha_list[i] < 1.0))
          throw ConfigError("--alphas entries must lie in (0,1)");
        if (i > 0 && spec.alpha_list[i] <= spec.alpha_list[i - 1])
          throw ConfigError("--alphas entries must be strictly increasing");
      }
    }
    if (!agents_arg.empty()) {
      const auto values = parse_list(agents_arg);
      if (spec.command == Command::nash_check) {
        spec.n_list.clear();
        for (double v : values) spec.n_list.push_back(static_cast<int>(v));
      } else {
        if (values.size() != 1) throw ConfigError("--agents takes a single value for this command");
        spec.config.n_agents = static_cast<int>(values.front());
      }
    }
    if (!formulation_arg.empty()) {
      if (formulation_arg == "target") spec.formulation = Formulation::target;
      else if (formulation_arg == "threshold") spec.formulation = Formulation::threshold;
      else throw ConfigError("--formulation must be `target` or `threshold`");
    }
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  return run(spec);
}

}  // namespace qmfg
