#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qmfg/errors.hpp"

namespace qmfg {

/// Deterministic support schedule gamma(t). Either a constant or a
/// piecewise-constant table (value v_i holds on [t_i, t_{i+1})), so any
/// schedule can be supplied through configuration.
class GammaSchedule {
 public:
  GammaSchedule() : constant_(true), values_{0.0} {}

  static GammaSchedule constant(double value);
  /// Table rows (t_i, v_i); times strictly increasing, first time must be 0.
  static GammaSchedule piecewise(std::vector<double> times, std::vector<double> values);

  double operator()(double t) const;
  /// Exact integral over [t0, t1] (piecewise-constant in closed form).
  double integral(double t0, double t1) const;

  bool is_constant() const { return constant_; }
  double constant_value() const { return values_.front(); }
  std::string describe() const;

 private:
  bool constant_;
  std::vector<double> times_;   // empty when constant
  std::vector<double> values_;  // size 1 when constant
};

/// All scalar model coefficients plus the support schedule.
struct ModelParams {
  double b = 0.5;       // effort efficiency
  double sigma = 0.5;   // idiosyncratic volatility
  double r = 0.1;       // effort cost weight
  double lambda = 1.0;  // terminal cost weight
  double T = 1.0;       // horizon
  double m0 = 0.0;      // initial state mean
  double nu = 0.5;      // initial state standard deviation
  GammaSchedule gamma;  // deterministic support schedule
};

struct QuantileLevel {
  double alpha = 0.95;  // must lie strictly inside (0,1)
};

/// Uniform time discretization of [0, T].
struct TimeGrid {
  int n_steps = 1000;
  double T = 1.0;

  double dt() const { return T / n_steps; }
  double time(int k) const { return (k == n_steps) ? T : k * dt(); }
  std::vector<double> times() const;
};

struct RunConfig {
  ModelParams params;
  QuantileLevel alpha;
  int n_steps = 1000;
  std::uint64_t seed = 42;
  int n_agents = 1000;
  int n_replications = 1000;

  TimeGrid time_grid() const { return TimeGrid{n_steps, params.T}; }
};

/// Returns every violated invariant; empty means the config is accepted.
std::vector<ValidationIssue> validate(const RunConfig& config);

/// Throws ValidationError (listing all issues) unless the config is accepted.
RunConfig validated(RunConfig config);

/// Documented defaults: T=1, gamma=0, m0=0, initial law N(0, 0.25) read as
/// variance (nu = 0.5), b=0.5, sigma=0.5, r=0.1, lambda=1, alpha=0.95,
/// n_steps=1000, n_agents=1000, n_replications=1000, seed=42.
RunConfig table1_defaults();

/// Loads a flat `key = value` file. Recognized keys: b, sigma, r, lambda, T,
/// m0, nu0_variance, alpha, n_steps, n_agents, n_replications, seed,
/// gamma_constant, gamma_table. Unknown keys are an error; missing keys keep
/// their defaults.
RunConfig load_config_file(const std::string& path);

/// Serializes the resolved config back to the flat key=value form.
std::string config_to_text(const RunConfig& config);

}  // namespace qmfg
