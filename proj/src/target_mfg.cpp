#include "qmfg/target_mfg.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "qmfg/quantiles.hpp"

namespace qmfg {

namespace {

// Cubic Hermite dense output on a uniform grid; node derivatives come from
// the ODE right-hand side, so evaluation keeps 4th-order accuracy at the
// half-steps the integrator asks for.
class HermitePath {
 public:
  HermitePath() = default;
  HermitePath(double t0, double dt, std::vector<double> y, std::vector<double> dy)
      : t0_(t0), dt_(dt), y_(std::move(y)), dy_(std::move(dy)) {}

  double operator()(double t) const {
    const int last = static_cast<int>(y_.size()) - 1;
    double s = (t - t0_) / dt_;
    int k = static_cast<int>(std::floor(s));
    if (k < 0) k = 0;
    if (k >= last) k = last - 1;
    const double u = s - k;
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
    const double h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u);
    const double h11 = u * u * (u - 1);
    return h00 * y_[k] + h10 * dt_ * dy_[k] + h01 * y_[k + 1] + h11 * dt_ * dy_[k + 1];
  }

 private:
  double t0_ = 0.0, dt_ = 1.0;
  std::vector<double> y_, dy_;
};

double lerp_path(const TimeGrid& grid, const std::vector<double>& y, double t) {
  const double s = t / grid.dt();
  int k = static_cast<int>(std::floor(s));
  if (k < 0) k = 0;
  if (k >= grid.n_steps) k = grid.n_steps - 1;
  const double u = s - k;
  return y[k] + u * (y[k + 1] - y[k]);
}

void check_time(const TimeGrid& grid, double t) {
  const double slack = 1e-12 * std::max(1.0, grid.T);
  if (t < -slack || t > grid.T + slack)
    throw TimeOutOfRange("time " + std::to_string(t) + " outside [0, " + std::to_string(grid.T) + "]");
}

// Classical RK4 over the grid nodes; rhs(t, y) must be evaluable anywhere.
std::vector<double> rk4_forward(const TimeGrid& grid, double y0,
                                const std::function<double(double, double)>& rhs) {
  std::vector<double> y(grid.n_steps + 1);
  y[0] = y0;
  const double h = grid.dt();
  for (int k = 0; k < grid.n_steps; ++k) {
    const double t = grid.time(k);
    const double k1 = rhs(t, y[k]);
    const double k2 = rhs(t + 0.5 * h, y[k] + 0.5 * h * k1);
    const double k3 = rhs(t + 0.5 * h, y[k] + 0.5 * h * k2);
    const double k4 = rhs(t + h, y[k] + h * k3);
    y[k + 1] = y[k] + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return y;
}

std::vector<double> rk4_backward(const TimeGrid& grid, double yT,
                                 const std::function<double(double, double)>& rhs) {
  std::vector<double> y(grid.n_steps + 1);
  y[grid.n_steps] = yT;
  const double h = grid.dt();
  for (int k = grid.n_steps; k > 0; --k) {
    const double t = grid.time(k);
    const double k1 = rhs(t, y[k]);
    const double k2 = rhs(t - 0.5 * h, y[k] - 0.5 * h * k1);
    const double k3 = rhs(t - 0.5 * h, y[k] - 0.5 * h * k2);
    const double k4 = rhs(t - h, y[k] - h * k3);
    y[k - 1] = y[k] - h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return y;
}

}  // namespace

double riccati_closed_form(const ModelParams& params, double t) {
  const double c = params.b * params.b / params.r;
  return 1.0 / (1.0 / params.lambda + c * (params.T - t));
}

double FbodeSolution::eta_at(double time) const { check_time(grid, time); return lerp_path(grid, eta, time); }
double FbodeSolution::v_at(double time) const { check_time(grid, time); return lerp_path(grid, v, time); }
double FbodeSolution::phi_at(double time) const { check_time(grid, time); return lerp_path(grid, phi, time); }
double FbodeSolution::qbar_at(double time) const { check_time(grid, time); return lerp_path(grid, qbar, time); }
double FbodeSolution::m_at(double time) const { check_time(grid, time); return lerp_path(grid, m, time); }
double FbodeSolution::theta_at(double time) const { check_time(grid, time); return lerp_path(grid, theta, time); }
double FbodeSolution::z_at(double time) const { return params.sigma * eta_at(time); }

FbodeSolution solve_fbode(const RunConfig& raw) {
  const RunConfig config = validated(raw);
  const ModelParams& p = config.params;
  const double alpha = config.alpha.alpha;
  if (p.nu == 0.0 && alpha != 0.5) {
    throw ValidationError({{ValidationIssue::Code::DegenerateGrid, "nu",
                            "nu = 0 with alpha != 0.5 makes the quantile equation singular at t = 0"}});
  }

  FbodeSolution sol;
  sol.grid = config.time_grid();
  sol.params = p;
  sol.alpha = alpha;
  sol.x_alpha = std_normal_quantile(alpha);

  const TimeGrid& grid = sol.grid;
  const double c = p.b * p.b / p.r;
  const double x_a = sol.x_alpha;
  const double half_sig2 = 0.5 * p.sigma * p.sigma;
  const auto eta_exact = [&](double t) { return riccati_closed_form(p, t); };

  sol.t = grid.times();

  // eta: integrate the Riccati equation backward from lambda; the closed
  // form drives every other right-hand side and doubles as its own check.
  sol.eta = rk4_backward(grid, p.lambda, [&](double t, double y) {
    (void)t;
    return c * y * y;
  });
  sol.pi.resize(grid.n_steps + 1);
  for (int k = 0; k <= grid.n_steps; ++k) sol.pi[k] = -sol.eta[k];

  // variance forward from nu^2
  const auto v_rhs = [&](double t, double y) { return p.sigma * p.sigma - 2.0 * c * eta_exact(t) * y; };
  sol.v = rk4_forward(grid, p.nu * p.nu, v_rhs);
  std::vector<double> v_deriv(grid.n_steps + 1);
  for (int k = 0; k <= grid.n_steps; ++k) v_deriv[k] = v_rhs(grid.time(k), sol.v[k]);
  HermitePath v_dense(0.0, grid.dt(), sol.v, v_deriv);

  // ratio term (sigma^2/2) X_alpha / sqrt(v_t); vanishes identically at the
  // median level so the degenerate case never touches sqrt(v)
  const auto ratio = [&](double t) {
    if (x_a == 0.0) return 0.0;
    return half_sig2 * x_a / std::sqrt(v_dense(t));
  };

  // phi backward from 0 (its equation already has pi = -eta substituted)
  const auto phi_rhs = [&](double t, double y) {
    (void)y;
    return (x_a == 0.0) ? 0.0 : half_sig2 * x_a / std::sqrt(v_dense(t)) * eta_exact(t);
  };
  sol.phi = rk4_backward(grid, 0.0, phi_rhs);
  std::vector<double> phi_deriv(grid.n_steps + 1);
  for (int k = 0; k <= grid.n_steps; ++k) phi_deriv[k] = phi_rhs(grid.time(k), sol.phi[k]);
  HermitePath phi_dense(0.0, grid.dt(), sol.phi, phi_deriv);

  // coupled forward pair (qbar, m)
  sol.qbar.assign(grid.n_steps + 1, 0.0);
  sol.m.assign(grid.n_steps + 1, 0.0);
  sol.qbar[0] = p.m0 + p.nu * x_a;
  sol.m[0] = p.m0;
  const double h = grid.dt();
  const auto q_rhs = [&](double t) { return p.gamma(t) - c * phi_dense(t) + ratio(t); };
  const auto m_rhs = [&](double t, double q, double mv) {
    const double theta = -eta_exact(t) * q + phi_dense(t);
    return p.gamma(t) - c * eta_exact(t) * mv - c * theta;
  };
  for (int k = 0; k < grid.n_steps; ++k) {
    const double t = grid.time(k);
    const double q = sol.qbar[k];
    const double mv = sol.m[k];
    const double q1 = q_rhs(t);
    const double m1 = m_rhs(t, q, mv);
    const double q2 = q_rhs(t + 0.5 * h);
    const double m2 = m_rhs(t + 0.5 * h, q + 0.5 * h * q1, mv + 0.5 * h * m1);
    const double q3 = q2;  // q's rhs does not depend on the state
    const double m3 = m_rhs(t + 0.5 * h, q + 0.5 * h * q2, mv + 0.5 * h * m2);
    const double q4 = q_rhs(t + h);
    const double m4 = m_rhs(t + h, q + h * q3, mv + h * m3);
    sol.qbar[k + 1] = q + h / 6.0 * (q1 + 2 * q2 + 2 * q3 + q4);
    sol.m[k + 1] = mv + h / 6.0 * (m1 + 2 * m2 + 2 * m3 + m4);
  }

  sol.theta.resize(grid.n_steps + 1);
  for (int k = 0; k <= grid.n_steps; ++k) sol.theta[k] = sol.pi[k] * sol.qbar[k] + sol.phi[k];
  return sol;
}

std::pair<std::vector<double>, std::vector<double>> mean_variance_paths(
    const FbodeSolution& solution, const RunConfig& config) {
  const ModelParams& p = config.params;
  const TimeGrid grid = solution.grid;
  const double c = p.b * p.b / p.r;

  // Hermite-densify theta from its own equation so the re-integration of
  // the mean stays 4th order between nodes.
  std::vector<double> theta_deriv(grid.n_steps + 1);
  for (int k = 0; k <= grid.n_steps; ++k) {
    const double t = grid.time(k);
    const double eta = riccati_closed_form(p, t);
    theta_deriv[k] = c * eta * solution.theta[k] - p.gamma(t) * eta;
  }
  HermitePath theta_dense(0.0, grid.dt(), solution.theta, theta_deriv);

  auto m_path = rk4_forward(grid, p.m0, [&](double t, double y) {
    return p.gamma(t) - c * riccati_closed_form(p, t) * y - c * theta_dense(t);
  });
  return {std::move(m_path), solution.v};
}

double equilibrium_policy(const FbodeSolution& solution, double t, double x) {
  check_time(solution.grid, t);
  const ModelParams& p = solution.params;
  const double eta = lerp_path(solution.grid, solution.eta, t);
  const double qbar = lerp_path(solution.grid, solution.qbar, t);
  const double phi = lerp_path(solution.grid, solution.phi, t);
  return -(p.b / p.r) * (eta * (x - qbar) + phi);
}

std::pair<double, double> equilibrium_density(const FbodeSolution& solution, double t) {
  check_time(solution.grid, t);
  return {lerp_path(solution.grid, solution.m, t), lerp_path(solution.grid, solution.v, t)};
}

double equilibrium_density_value(const FbodeSolution& solution, double t, double y) {
  const auto [mean, var] = equilibrium_density(solution, t);
  if (var <= 0.0) return (y == mean) ? std::numeric_limits<double>::infinity() : 0.0;
  const double s = std::sqrt(var);
  return std_normal_pdf((y - mean) / s) / s;
}

double nash_error_estimate(const FbodeSolution& solution, const RunConfig& config, int n_agents) {
  if (n_agents < 2) throw ValidationError({{ValidationIssue::Code::NonPositiveParameter, "n_agents",
                                            "n_agents must be >= 2 for the error estimate"}});
  const double alpha = solution.alpha;
  const double q_T = solution.qbar.back();
  const double density = equilibrium_density_value(solution, config.params.T, q_T);
  return std::sqrt(alpha * (1.0 - alpha) / n_agents) / density;
}

double limiting_cost(const FbodeSolution& solution, const RunConfig& config) {
  const ModelParams& p = config.params;
  const TimeGrid& grid = solution.grid;
  // E[u*^2] from the Gaussian moments; m - qbar = -X_alpha sqrt(v) at equilibrium.
  const auto integrand = [&](int k) {
    const double eta = solution.eta[k];
    const double phi = solution.phi[k];
    const double v = solution.v[k];
    const double dev = solution.m[k] - solution.qbar[k];
    const double e2 = eta * eta * (v + dev * dev) + 2.0 * eta * phi * dev + phi * phi;
    return (p.b / p.r) * (p.b / p.r) * e2;
  };
  // composite Simpson over the uniform grid (n_steps is even in practice;
  // a trapezoid cell absorbs an odd tail)
  double integral = 0.0;
  const double h = grid.dt();
  int k = 0;
  for (; k + 2 <= grid.n_steps; k += 2)
    integral += h / 3.0 * (integrand(k) + 4.0 * integrand(k + 1) + integrand(k + 2));
  if (k < grid.n_steps) integral += 0.5 * h * (integrand(k) + integrand(k + 1));

  const double v_T = solution.v.back();
  const double dev_T = solution.m.back() - solution.qbar.back();
  const double terminal = 0.5 * p.lambda * (v_T + dev_T * dev_T);
  return 0.5 * p.r * integral + terminal;
}

TargetPolicy::TargetPolicy(const FbodeSolution& solution, const TimeGrid& grid)
    : solution_(&solution), slope_(grid.n_steps + 1), offset_(grid.n_steps + 1) {
  const ModelParams& p = solution.params;
  const double gain = -(p.b / p.r);
  for (int k = 0; k <= grid.n_steps; ++k) {
    const double t = grid.time(k);
    const double eta = lerp_path(solution.grid, solution.eta, t);
    const double qbar = lerp_path(solution.grid, solution.qbar, t);
    const double phi = lerp_path(solution.grid, solution.phi, t);
    slope_[k] = gain * eta;
    offset_[k] = gain * (-eta * qbar + phi);
  }
}

double TargetPolicy::at(double t, double x) const { return equilibrium_policy(*solution_, t, x); }

}  // namespace qmfg
