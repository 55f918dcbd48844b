#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qmfg/model.hpp"
#include "qmfg/quantiles.hpp"
#include "qmfg/target_mfg.hpp"

namespace qmfg {

/// Uniform cell-centered state grid.
struct SpatialGrid {
  double x_min = -6.0;
  double x_max = 6.0;
  int n_cells = 1024;

  double dx() const { return (x_max - x_min) / n_cells; }
  double center(int j) const { return x_min + (j + 0.5) * dx(); }
  double edge(int j) const { return x_min + j * dx(); }

  /// Grid wide enough for the initial law (m0 +- 8 sqrt(nu^2 + sigma^2 T))
  /// and the quantile region (q_reference +- 6 sigma sqrt(T)), with a small
  /// pad so the iterates can drift.
  static SpatialGrid cover(const RunConfig& config, double q_reference, int n_cells = 1024);
};

/// One-sided terminal cost: lambda/2 (x-q)^2 below the threshold, zero at
/// and above it (strict inequality at the kink).
double terminal_cost(double x, double q, double lambda);

/// Feedback control surface u*(t,x) for a fixed terminal threshold q_T.
struct PolicyGrid {
  TimeGrid time_grid;
  SpatialGrid space_grid;
  std::vector<double> u_star;  // (n_steps+1) x n_cells, row-major in time
  double q_T = 0.0;

  double at(int k, int j) const { return u_star[static_cast<std::size_t>(k) * space_grid.n_cells + j]; }
  /// Bilinear interpolation, clamped to the grid box.
  double value(double t, double x) const;
};

/// Cell probabilities per time slice.
struct DensityGrid {
  TimeGrid time_grid;
  SpatialGrid space_grid;
  std::vector<double> p;  // (n_steps+1) x n_cells, row-major in time
  double max_renorm_correction = 0.0;  // largest per-slice |mass - 1| seen

  const double* slice(int k) const { return p.data() + static_cast<std::size_t>(k) * space_grid.n_cells; }
  GriddedLaw law_at(int k) const;
  double slice_mean(int k) const;
  double slice_variance(int k) const;
};

struct FixedPointConfig {
  double delta = 1e-4;     // stopping tolerance on the terminal quantile
  int max_iterations = 50;
  double rho = 0.5;        // relaxation weight in (0,1]
};

struct FixedPointIteration {
  int index;
  double q_candidate;
  double mapped_quantile;
  double residual;  // |q^(k+1) - q^(k)|
};

struct ThresholdSolution {
  double q_T = 0.0;
  PolicyGrid policy;
  DensityGrid density;
  std::vector<double> qbar;  // quantile path extracted from every slice
  std::vector<FixedPointIteration> trace;
  int iterations = 0;
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, std::vector<FixedPointIteration> trace)
      : Error(what), trace_(std::move(trace)) {}
  const std::vector<FixedPointIteration>& trace() const { return trace_; }

 private:
  std::vector<FixedPointIteration> trace_;
};

/// Inner control problem for a fixed threshold, solved through the
/// exponential transformation of the dynamic-programming equation:
///   w(t,x) = E[ exp(-kappa g(x + Gamma(t,T) + sigma sqrt(T-t) Z)) ],
///   u*(t,x) = (sigma^2/b) d/dx ln w(t,x),       kappa = b^2/(r sigma^2),
/// with g the one-sided terminal cost. w and dw/dx are evaluated by
/// Gauss-Legendre quadrature against the Gaussian kernel (the x-derivative
/// acts on the kernel analytically); the integration domain is split at the
/// kink y = q_T so each piece is smooth.
PolicyGrid solve_hjb(double q_T, const RunConfig& config, const SpatialGrid& grid);

/// Propagates the initial law N(m0, nu^2) under drift gamma + b u* and
/// diffusion sigma^2/2 with a conservative finite-volume scheme: upwinded
/// drift flux, centered diffusion, implicit time stepping, zero-flux walls.
/// Slices are renormalized only against roundoff; a pre-renormalization
/// mass defect beyond 1e-6 throws MassLoss.
DensityGrid propagate_density(const PolicyGrid& policy, const RunConfig& config);

/// Damped scalar fixed point on the terminal quantile:
///   q^(k+1) = (1-rho) q^(k) + rho Q(alpha, terminal law under q^(k)),
/// stopping when |q^(k+1) - q^(k)| < delta. The default initial iterate is
/// the target-based terminal quantile (warm start); pass `initial_q` for a
/// cold start, e.g. gaussian_quantile(m0, nu^2, alpha).
ThresholdSolution fixed_point_solve(const RunConfig& config, const FixedPointConfig& fp,
                                    const SpatialGrid& grid,
                                    std::optional<double> initial_q = std::nullopt);

/// Policy wrapper for the population simulator (row lookup per step).
class ThresholdPolicy {
 public:
  ThresholdPolicy(const PolicyGrid& policy, const TimeGrid& sim_grid);
  double operator()(int step, double x) const;
  double at(double t, double x) const { return policy_->value(t, x); }

 private:
  const PolicyGrid* policy_;
  std::vector<double> row_time_;  // simulation step -> policy time
};

}  // namespace qmfg
