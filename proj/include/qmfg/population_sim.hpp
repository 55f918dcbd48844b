#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qmfg/model.hpp"
#include "qmfg/quantiles.hpp"
#include "qmfg/rng.hpp"

namespace qmfg {

enum class Formulation { target, threshold };

inline const char* formulation_name(Formulation f) {
  return f == Formulation::target ? "target" : "threshold";
}

struct SimOptions {
  bool store_paths = false;
  std::uint32_t replication = 0;
  std::string policy_tag = "target";
};

/// One simulated N-agent population. Agent i draws its noise from the
/// counter-based stream (seed, replication, i); draw 0 seeds the initial
/// state, draws 1..n_steps drive the time stepping. Identical (config,
/// seed) therefore reproduce bit-identical runs in any execution order.
struct PopulationRun {
  std::vector<double> terminal_states;        // length N
  std::vector<double> paths;                  // (n_steps+1) x N when stored
  std::vector<double> controls;               // n_steps x N when stored
  std::vector<double> running_cost;           // (r/2) sum u^2 dt per agent
  double sample_quantile_T = 0.0;
  std::uint64_t seed = 0;
  std::uint32_t replication = 0;
  std::string policy_tag;
  int n_steps = 0;
  bool has_paths = false;

  double path_at(int step, int agent) const {
    return paths[static_cast<std::size_t>(step) * terminal_states.size() + agent];
  }
  double control_at(int step, int agent) const {
    return controls[static_cast<std::size_t>(step) * terminal_states.size() + agent];
  }
};

struct CostReport {
  double running_cost = 0.0;
  double terminal_cost = 0.0;
  double total = 0.0;
  Formulation formulation = Formulation::target;
};

/// Euler-Maruyama over the shared time grid. `policy` is called as
/// policy(step, x) with step*dt the left endpoint of the increment.
template <class Policy>
PopulationRun simulate_population(const RunConfig& raw, const Policy& policy, SimOptions opts = {}) {
  const RunConfig config = validated(raw);
  const ModelParams& p = config.params;
  const int N = config.n_agents;
  const int n_steps = config.n_steps;
  const double dt = p.T / n_steps;
  const double sig_dt = p.sigma * std::sqrt(dt);

  std::vector<double> gamma_step(n_steps);
  for (int k = 0; k < n_steps; ++k) gamma_step[k] = p.gamma(k * dt) * dt;

  PopulationRun run;
  run.terminal_states.resize(N);
  run.running_cost.resize(N);
  run.seed = config.seed;
  run.replication = opts.replication;
  run.policy_tag = opts.policy_tag;
  run.n_steps = n_steps;
  run.has_paths = opts.store_paths;
  if (opts.store_paths) {
    run.paths.resize(static_cast<std::size_t>(n_steps + 1) * N);
    run.controls.resize(static_cast<std::size_t>(n_steps) * N);
  }

  for (int i = 0; i < N; ++i) {
    NormalStream stream(config.seed, opts.replication, static_cast<std::uint32_t>(i));
    double x = p.m0 + p.nu * stream.next();
    double sum_u2 = 0.0;
    for (int k = 0; k < n_steps; ++k) {
      const double u = policy(k, x);
      if (opts.store_paths) {
        run.paths[static_cast<std::size_t>(k) * N + i] = x;
        run.controls[static_cast<std::size_t>(k) * N + i] = u;
      }
      sum_u2 += u * u;
      x += gamma_step[k] + p.b * u * dt + sig_dt * stream.next();
    }
    if (opts.store_paths) run.paths[static_cast<std::size_t>(n_steps) * N + i] = x;
    run.terminal_states[i] = x;
    run.running_cost[i] = 0.5 * p.r * sum_u2 * dt;
  }
  run.sample_quantile_T = empirical_quantile(run.terminal_states, config.alpha.alpha);
  return run;
}

/// Adapter for feedback maps given as u(t, x).
class TimeStatePolicy {
 public:
  TimeStatePolicy(std::function<double(double, double)> u, const TimeGrid& grid)
      : u_(std::move(u)), dt_(grid.dt()) {}
  double operator()(int step, double x) const { return u_(step * dt_, x); }

 private:
  std::function<double(double, double)> u_;
  double dt_;
};

/// Realized cost of one agent against the run's own sample quantile;
/// running cost by the left-endpoint rule. Requires stored paths.
CostReport realized_cost(const PopulationRun& run, int agent, const RunConfig& config,
                         Formulation formulation);

/// Kolmogorov-Smirnov statistic of a sample against N(mean, variance).
double ks_statistic(std::span<const double> values, double mean, double variance);

struct CltReport {
  int n_replications = 0;
  int n_agents = 0;
  double qbar_T = 0.0;           // limiting quantile supplied by the caller
  double mean_quantile = 0.0;
  double sd_quantile = 0.0;
  double standard_error = 0.0;   // sd / sqrt(replications)
  double z_score = 0.0;          // (mean - qbar_T) / standard_error
  double predicted_sd_classical = 0.0;  // sqrt(a(1-a)/N) / p
  double predicted_sd_paper = 0.0;      // sqrt(a(1-a)/N) / sqrt(p)
  const char* closer_scaling = "";
  std::vector<double> quantiles;  // per replication
};

/// Replicated sample-quantile experiment; replication j draws its agents
/// from streams (seed, j, agent). Both candidate dispersion scalings are
/// reported: the classical one with the density to the first power in the
/// rate, and the literal one with its square root (see module notes).
template <class Policy>
CltReport clt_experiment(const RunConfig& raw, const Policy& policy, double qbar_T, double p_at_q) {
  const RunConfig config = validated(raw);
  CltReport report;
  report.n_replications = config.n_replications;
  report.n_agents = config.n_agents;
  report.qbar_T = qbar_T;
  report.quantiles.resize(config.n_replications);
  for (int j = 0; j < config.n_replications; ++j) {
    SimOptions opts;
    opts.replication = static_cast<std::uint32_t>(j);
    report.quantiles[j] = simulate_population(config, policy, opts).sample_quantile_T;
  }
  double mean = 0.0;
  for (double q : report.quantiles) mean += q;
  mean /= report.n_replications;
  double ss = 0.0;
  for (double q : report.quantiles) ss += (q - mean) * (q - mean);
  report.mean_quantile = mean;
  report.sd_quantile = std::sqrt(ss / (report.n_replications - 1));
  report.standard_error = report.sd_quantile / std::sqrt(static_cast<double>(report.n_replications));
  report.z_score = (mean - qbar_T) / report.standard_error;
  const double alpha = config.alpha.alpha;
  const double rate = std::sqrt(alpha * (1.0 - alpha) / config.n_agents);
  report.predicted_sd_classical = rate / p_at_q;
  report.predicted_sd_paper = rate / std::sqrt(p_at_q);
  const double err_classical = std::fabs(report.sd_quantile - report.predicted_sd_classical);
  const double err_paper = std::fabs(report.sd_quantile - report.predicted_sd_paper);
  report.closer_scaling = err_classical <= err_paper ? "classical" : "paper-literal";
  return report;
}

struct NashGapPoint {
  int n_agents = 0;
  int replications = 0;
  double mean_cost = 0.0;      // Monte Carlo mean of agent 1's realized cost
  double cost_se = 0.0;        // standard error of that mean
  double gap = 0.0;            // |mean_cost - limiting_cost|
  double mean_quantile = 0.0;
  double sd_quantile = 0.0;
};

struct NashGapReport {
  double limiting_cost = 0.0;
  std::vector<NashGapPoint> points;
  double gap_slope = 0.0;  // log-log regression of gap on N
  double sd_slope = 0.0;   // log-log regression of sd(sample quantile) on N
};

double loglog_slope(std::span<const double> x, std::span<const double> y);

/// Cost-convergence experiment: agent 1's finite-population cost under the
/// equilibrium policy (target-formulation terminal cost against the run's
/// own sample quantile) versus the limiting cost, across population sizes.
template <class Policy>
NashGapReport nash_gap_experiment(const RunConfig& raw, const Policy& policy,
                                  std::span<const int> n_values, double limiting_cost_value) {
  const RunConfig base = validated(raw);
  NashGapReport report;
  report.limiting_cost = limiting_cost_value;
  for (int N : n_values) {
    RunConfig config = base;
    config.n_agents = N;
    NashGapPoint point;
    point.n_agents = N;
    point.replications = config.n_replications;
    std::vector<double> costs(config.n_replications), quants(config.n_replications);
    for (int j = 0; j < config.n_replications; ++j) {
      SimOptions opts;
      opts.replication = static_cast<std::uint32_t>(j);
      const PopulationRun run = simulate_population(config, policy, opts);
      const double dev = run.terminal_states[0] - run.sample_quantile_T;
      costs[j] = run.running_cost[0] + 0.5 * config.params.lambda * dev * dev;
      quants[j] = run.sample_quantile_T;
    }
    double mean_cost = 0.0, mean_q = 0.0;
    for (int j = 0; j < config.n_replications; ++j) {
      mean_cost += costs[j];
      mean_q += quants[j];
    }
    mean_cost /= config.n_replications;
    mean_q /= config.n_replications;
    double ss_cost = 0.0, ss_q = 0.0;
    for (int j = 0; j < config.n_replications; ++j) {
      ss_cost += (costs[j] - mean_cost) * (costs[j] - mean_cost);
      ss_q += (quants[j] - mean_q) * (quants[j] - mean_q);
    }
    point.mean_cost = mean_cost;
    point.cost_se = std::sqrt(ss_cost / (config.n_replications - 1) / config.n_replications);
    point.gap = std::fabs(mean_cost - limiting_cost_value);
    point.mean_quantile = mean_q;
    point.sd_quantile = std::sqrt(ss_q / (config.n_replications - 1));
    report.points.push_back(point);
  }
  std::vector<double> ns, gaps, sds;
  for (const auto& pt : report.points) {
    ns.push_back(static_cast<double>(pt.n_agents));
    gaps.push_back(pt.gap);
    sds.push_back(pt.sd_quantile);
  }
  report.gap_slope = loglog_slope(ns, gaps);
  report.sd_slope = loglog_slope(ns, sds);
  return report;
}

}  // namespace qmfg
