#pragma once

#include <utility>
#include <vector>

#include "qmfg/model.hpp"

namespace qmfg {

/// Time-gridded solution of the decoupled forward-backward ODE system for
/// the target-based game: backward Riccati gain `eta`, its mirror
/// `pi = -eta`, state variance `v`, backward offset `phi`, equilibrium
/// quantile path `qbar`, population mean `m`, and the recomposed affine
/// adjoint offset `theta = pi*qbar + phi`.
struct FbodeSolution {
  TimeGrid grid;
  ModelParams params;
  double alpha = 0.95;
  double x_alpha = 0.0;  // standard-normal quantile at level alpha

  std::vector<double> t;
  std::vector<double> eta;
  std::vector<double> pi;
  std::vector<double> v;
  std::vector<double> phi;
  std::vector<double> qbar;
  std::vector<double> m;
  std::vector<double> theta;

  // linear interpolation between grid nodes (the documented path convention)
  double eta_at(double time) const;
  double v_at(double time) const;
  double phi_at(double time) const;
  double qbar_at(double time) const;
  double m_at(double time) const;
  double theta_at(double time) const;

  /// Martingale-representation volatility of the adjoint, z(t) = sigma*eta(t).
  double z_at(double time) const;
};

/// Exact Riccati solution eta(t) = 1 / (1/lambda + (b^2/r) (T - t)).
double riccati_closed_form(const ModelParams& params, double t);

/// Solves the five-path system on the shared grid with the classical
/// fixed-step 4th-order scheme (eta backward, checked against the closed
/// form; v, qbar, m forward; phi backward). pi is set to -eta exactly.
FbodeSolution solve_fbode(const RunConfig& config);

/// Re-integrates the population mean from theta and returns (m, v); used to
/// cross-check the mean-field consistency identity.
std::pair<std::vector<double>, std::vector<double>> mean_variance_paths(
    const FbodeSolution& solution, const RunConfig& config);

/// Equilibrium feedback u(t,x) = -(b/r) (eta_t (x - qbar_t) + phi_t).
double equilibrium_policy(const FbodeSolution& solution, double t, double x);

/// Gaussian law of the optimal state at time t: (mean, variance).
std::pair<double, double> equilibrium_density(const FbodeSolution& solution, double t);

/// Density value of the optimal state's law at (t, y).
double equilibrium_density_value(const FbodeSolution& solution, double t, double y);

/// sqrt(alpha (1-alpha) / N) / p(T, qbar_T): the finite-population error
/// rate expression with unit constant (an order estimate, not a bound).
double nash_error_estimate(const FbodeSolution& solution, const RunConfig& config, int n_agents);

/// Expected equilibrium cost of a representative agent in the limiting
/// model, evaluated from the Gaussian moments (Simpson in time).
double limiting_cost(const FbodeSolution& solution, const RunConfig& config);

/// Feedback policy precomputed on the simulation grid: u = A_k x + B_k per
/// step, so one population step costs two fused multiply-adds per agent.
class TargetPolicy {
 public:
  TargetPolicy(const FbodeSolution& solution, const TimeGrid& grid);

  double operator()(int step, double x) const { return slope_[step] * x + offset_[step]; }
  double at(double t, double x) const;

 private:
  const FbodeSolution* solution_;
  std::vector<double> slope_, offset_;
};

}  // namespace qmfg
