#include "qmfg/population_sim.hpp"

#include <algorithm>
#include <cmath>

namespace qmfg {

CostReport realized_cost(const PopulationRun& run, int agent, const RunConfig& config,
                         Formulation formulation) {
  if (!run.has_paths)
    throw PathsNotStored("realized_cost needs a run simulated with store_paths = true");
  const int N = static_cast<int>(run.terminal_states.size());
  if (agent < 0 || agent >= N) throw Error("agent index out of range");

  const ModelParams& p = config.params;
  const double dt = p.T / run.n_steps;
  double sum_u2 = 0.0;
  for (int k = 0; k < run.n_steps; ++k) {
    const double u = run.control_at(k, agent);
    sum_u2 += u * u;
  }
  CostReport report;
  report.formulation = formulation;
  report.running_cost = 0.5 * p.r * sum_u2 * dt;
  const double x_T = run.terminal_states[agent];
  const double q = run.sample_quantile_T;
  if (formulation == Formulation::target) {
    report.terminal_cost = 0.5 * p.lambda * (x_T - q) * (x_T - q);
  } else {
    report.terminal_cost = (x_T < q) ? 0.5 * p.lambda * (x_T - q) * (x_T - q) : 0.0;
  }
  report.total = report.running_cost + report.terminal_cost;
  return report;
}

double ks_statistic(std::span<const double> values, double mean, double variance) {
  if (values.empty()) throw EmptySample("ks_statistic needs a nonempty sample");
  if (!(variance > 0.0)) throw NegativeVariance("ks_statistic needs a positive variance");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double s = std::sqrt(variance);
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = std_normal_cdf((sorted[i] - mean) / s);
    d = std::max(d, std::fabs((i + 1) / n - f));
    d = std::max(d, std::fabs(f - i / n));
  }
  return d;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace qmfg
