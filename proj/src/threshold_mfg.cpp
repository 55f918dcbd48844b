#include "qmfg/threshold_mfg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qmfg {

namespace {

// 16-point Gauss-Legendre rule on [-1, 1].
constexpr int kGlPoints = 16;
constexpr double kGlNode[kGlPoints / 2] = {
    0.0950125098376374401853, 0.2816035507792589132304, 0.4580167776572273863424,
    0.6178762444026437484467, 0.7554044083550030338951, 0.8656312023878317438805,
    0.9445750230732325760780, 0.9894009349916499325962};
constexpr double kGlWeight[kGlPoints / 2] = {
    0.1894506104550684962854, 0.1826034150449235888667, 0.1691565193950025381893,
    0.1495959888165767320815, 0.1246289712555338720525, 0.0951585116824927848099,
    0.0622535239386478928628, 0.0271524594117540948518};

constexpr int kPanels = 3;        // composite panels on the smooth lower piece
constexpr double kSupportSigmas = 10.0;  // quadrature domain half-width in peak units

struct PointValue {
  double w;
  double dw;
};

// w(t,x) and dw/dx at one state, for threshold q and kernel width s.
// Lower piece (y < q): Gauss-Legendre on the product-Gaussian support with a
// common exponent shift so deep-tail states stay representable.
// Upper piece (y >= q): the transformed cost is 1, so the kernel integrates
// to a normal tail and its x-derivative telescopes to the kernel at the kink.
PointValue hjb_point(double x, double q, double s, double gamma_shift, double a) {
  const double c = x + gamma_shift;
  const double inv_s2 = 1.0 / (s * s);
  const double prec = inv_s2 + a;
  const double peak_sd = 1.0 / std::sqrt(prec);
  const double mu = (c * inv_s2 + a * q) / prec;

  const double upper_w = std_normal_cdf((c - q) / s);
  const double upper_dw = std_normal_pdf((q - c) / s) / s;

  // The product of the kernel and the transformed cost is one Gaussian with
  // center mu and width peak_sd; clamp the domain to its support so the
  // nodes are never spent on dead regions between the peak and the kink.
  const double y_hi = std::min(q, mu + kSupportSigmas * peak_sd);
  const double y_lo = std::min(mu, q) - kSupportSigmas * peak_sd;
  const auto log_integrand = [&](double y) {
    const double dz = y - c;
    const double dq = y - q;
    return -0.5 * dz * dz * inv_s2 - 0.5 * a * dq * dq;
  };
  const double shift = log_integrand(std::min(std::max(mu, y_lo), y_hi));

  double s0 = 0.0, s1 = 0.0;
  const double panel_width = (y_hi - y_lo) / kPanels;
  for (int p = 0; p < kPanels; ++p) {
    const double mid = y_lo + (p + 0.5) * panel_width;
    const double half = 0.5 * panel_width;
    for (int i = 0; i < kGlPoints / 2; ++i) {
      for (int sign = -1; sign <= 1; sign += 2) {
        const double y = mid + sign * half * kGlNode[i];
        const double f = std::exp(log_integrand(y) - shift);
        s0 += kGlWeight[i] * half * f;
        s1 += kGlWeight[i] * half * f * (y - c) * inv_s2;
      }
    }
  }
  const double scale = std::exp(shift) / (s * std::sqrt(2.0 * M_PI));
  return {upper_w + scale * s0, upper_dw + scale * s1};
}

void thomas_solve(std::vector<double>& lower, std::vector<double>& diag,
                  std::vector<double>& upper, std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double m = lower[i] / diag[i - 1];
    diag[i] -= m * upper[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

void check_support(const SpatialGrid& grid, const RunConfig& config, double q_T) {
  const ModelParams& p = config.params;
  const double spread = 8.0 * std::sqrt(p.nu * p.nu + p.sigma * p.sigma * p.T);
  const double qband = 6.0 * p.sigma * std::sqrt(p.T);
  const double lo = std::min(p.m0 - spread, q_T - qband);
  const double hi = std::max(p.m0 + spread, q_T + qband);
  if (grid.x_min > lo || grid.x_max < hi) {
    throw GridTooNarrow("spatial grid [" + std::to_string(grid.x_min) + ", " +
                        std::to_string(grid.x_max) + "] does not cover the required support [" +
                        std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

}  // namespace

SpatialGrid SpatialGrid::cover(const RunConfig& config, double q_reference, int n_cells) {
  const ModelParams& p = config.params;
  const double spread = 8.0 * std::sqrt(p.nu * p.nu + p.sigma * p.sigma * p.T);
  const double qband = 6.0 * p.sigma * std::sqrt(p.T);
  const double pad = 0.25;
  SpatialGrid grid;
  grid.x_min = std::min(p.m0 - spread, q_reference - qband) - pad;
  grid.x_max = std::max(p.m0 + spread, q_reference + qband) + pad;
  grid.n_cells = n_cells;
  return grid;
}

double terminal_cost(double x, double q, double lambda) {
  if (x < q) {
    const double d = x - q;
    return 0.5 * lambda * d * d;
  }
  return 0.0;
}

double PolicyGrid::value(double t, double x) const {
  const double dt = time_grid.dt();
  double s = t / dt;
  int k = static_cast<int>(std::floor(s));
  k = std::clamp(k, 0, time_grid.n_steps - 1);
  const double wt = std::clamp(s - k, 0.0, 1.0);

  const double dx = space_grid.dx();
  double g = (x - space_grid.center(0)) / dx;
  int j = static_cast<int>(std::floor(g));
  j = std::clamp(j, 0, space_grid.n_cells - 2);
  const double wx = std::clamp(g - j, 0.0, 1.0);

  const double lo = at(k, j) * (1 - wx) + at(k, j + 1) * wx;
  const double hi = at(k + 1, j) * (1 - wx) + at(k + 1, j + 1) * wx;
  return lo * (1 - wt) + hi * wt;
}

PolicyGrid solve_hjb(double q_T, const RunConfig& raw, const SpatialGrid& grid) {
  const RunConfig config = validated(raw);
  if (!std::isfinite(q_T)) throw GridTooNarrow("q_T must be finite");
  check_support(grid, config, q_T);

  const ModelParams& p = config.params;
  const double kappa = p.b * p.b / (p.r * p.sigma * p.sigma);
  const double a = kappa * p.lambda;

  PolicyGrid policy;
  policy.time_grid = config.time_grid();
  policy.space_grid = grid;
  policy.q_T = q_T;
  policy.u_star.assign(static_cast<std::size_t>(policy.time_grid.n_steps + 1) * grid.n_cells, 0.0);

  const int n_steps = policy.time_grid.n_steps;
  const double tiny = std::numeric_limits<double>::min();
  for (int k = 0; k <= n_steps; ++k) {
    const double t = policy.time_grid.time(k);
    double* row = policy.u_star.data() + static_cast<std::size_t>(k) * grid.n_cells;
    if (k == n_steps) {
      // s = 0: the transform degenerates to the terminal gradient
      for (int j = 0; j < grid.n_cells; ++j)
        row[j] = (p.b / p.r) * p.lambda * std::max(q_T - grid.center(j), 0.0);
      continue;
    }
    const double s = p.sigma * std::sqrt(p.T - t);
    const double gamma_shift = p.gamma.integral(t, p.T);
    for (int j = 0; j < grid.n_cells; ++j) {
      const PointValue pv = hjb_point(grid.center(j), q_T, s, gamma_shift, a);
      if (!(pv.w >= tiny) || !std::isfinite(pv.w)) {
        throw QuadratureUnderflow("transformed value underflowed at t = " + std::to_string(t) +
                                  ", x = " + std::to_string(grid.center(j)) +
                                  "; grid bounds too wide for the transform scaling");
      }
      // dw/dx >= 0 since the transformed cost is nonincreasing in x; the
      // quadrature can round the vanishing tail to a negative denormal
      row[j] = p.sigma * p.sigma / p.b * (std::max(pv.dw, 0.0) / pv.w);
    }
  }
  return policy;
}

GriddedLaw DensityGrid::law_at(int k) const {
  GriddedLaw law;
  law.x.resize(space_grid.n_cells);
  for (int j = 0; j < space_grid.n_cells; ++j) law.x[j] = space_grid.center(j);
  const double* row = slice(k);
  law.mass.assign(row, row + space_grid.n_cells);
  return law;
}

double DensityGrid::slice_mean(int k) const {
  const double* row = slice(k);
  double mean = 0.0;
  for (int j = 0; j < space_grid.n_cells; ++j) mean += row[j] * space_grid.center(j);
  return mean;
}

double DensityGrid::slice_variance(int k) const {
  const double mean = slice_mean(k);
  const double* row = slice(k);
  double var = 0.0;
  for (int j = 0; j < space_grid.n_cells; ++j) {
    const double d = space_grid.center(j) - mean;
    var += row[j] * d * d;
  }
  return var;
}

DensityGrid propagate_density(const PolicyGrid& policy, const RunConfig& raw) {
  const RunConfig config = validated(raw);
  const ModelParams& p = config.params;
  const SpatialGrid& grid = policy.space_grid;
  const TimeGrid& tg = policy.time_grid;
  const int M = grid.n_cells;
  const double dx = grid.dx();
  const double dt = tg.dt();
  const double D = 0.5 * p.sigma * p.sigma;
  const double r2 = dt / (dx * dx);

  DensityGrid density;
  density.time_grid = tg;
  density.space_grid = grid;
  density.p.assign(static_cast<std::size_t>(tg.n_steps + 1) * M, 0.0);

  // initial slice: exact Gaussian cell masses (point mass when nu = 0)
  std::vector<double> mass(M, 0.0);
  if (p.nu > 0.0) {
    double prev = std_normal_cdf((grid.edge(0) - p.m0) / p.nu);
    for (int j = 0; j < M; ++j) {
      const double next = std_normal_cdf((grid.edge(j + 1) - p.m0) / p.nu);
      mass[j] = next - prev;
      prev = next;
    }
  } else {
    int j0 = static_cast<int>(std::floor((p.m0 - grid.x_min) / dx));
    mass[std::clamp(j0, 0, M - 1)] = 1.0;
  }
  double total = 0.0;
  for (double v : mass) total += v;
  if (std::fabs(total - 1.0) > 1e-6)
    throw MassLoss("initial law loses mass on the grid: total = " + std::to_string(total));
  for (double& v : mass) v /= total;
  std::copy(mass.begin(), mass.end(), density.p.begin());

  std::vector<double> lower(M), diag(M), upper(M), rhs(M);
  for (int k = 0; k < tg.n_steps; ++k) {
    const double gamma_t = p.gamma(tg.time(k));
    const double* urow = policy.u_star.data() + static_cast<std::size_t>(k) * M;
    // face velocities between cells j and j+1
    std::fill(lower.begin(), lower.end(), 0.0);
    std::fill(upper.begin(), upper.end(), 0.0);
    std::fill(diag.begin(), diag.end(), 1.0);
    for (int j = 0; j + 1 < M; ++j) {
      const double a_face = gamma_t + p.b * 0.5 * (urow[j] + urow[j + 1]);
      const double a_plus = std::max(a_face, 0.0);
      const double a_minus = std::min(a_face, 0.0);
      const double out_j = r2 * (a_plus * dx + D);     // leaves cell j rightward
      const double out_j1 = r2 * (D - a_minus * dx);   // leaves cell j+1 leftward
      diag[j] += out_j;
      upper[j] = -out_j1;
      diag[j + 1] += out_j1;
      lower[j + 1] = -out_j;
    }
    rhs = mass;
    thomas_solve(lower, diag, upper, rhs);

    double slice_total = 0.0;
    for (double v : rhs) slice_total += v;
    const double defect = std::fabs(slice_total - 1.0);
    if (defect > 1e-6)
      throw MassLoss("slice mass defect " + std::to_string(defect) + " at step " + std::to_string(k + 1) +
                     "; grid too narrow");
    density.max_renorm_correction = std::max(density.max_renorm_correction, defect);
    for (double& v : rhs) v /= slice_total;
    mass = rhs;
    std::copy(mass.begin(), mass.end(), density.p.begin() + static_cast<std::size_t>(k + 1) * M);
  }
  return density;
}

ThresholdSolution fixed_point_solve(const RunConfig& raw, const FixedPointConfig& fp,
                                    const SpatialGrid& grid, std::optional<double> initial_q) {
  const RunConfig config = validated(raw);
  if (!(fp.delta > 0.0)) throw ValidationError({{ValidationIssue::Code::NonPositiveParameter, "delta",
                                                 "fixed-point tolerance delta must be positive"}});
  if (!(fp.rho > 0.0 && fp.rho <= 1.0))
    throw ValidationError({{ValidationIssue::Code::NonPositiveParameter, "rho",
                            "relaxation weight rho must lie in (0,1]"}});

  double q = initial_q ? *initial_q : solve_fbode(config).qbar.back();
  const double alpha = config.alpha.alpha;

  std::vector<FixedPointIteration> trace;
  bool converged = false;
  for (int k = 0; k < fp.max_iterations; ++k) {
    const PolicyGrid policy = solve_hjb(q, config, grid);
    const DensityGrid density = propagate_density(policy, config);
    const double mapped = grid_quantile(density.law_at(config.n_steps), alpha);
    const double q_next = (1.0 - fp.rho) * q + fp.rho * mapped;
    const double residual = std::fabs(q_next - q);
    trace.push_back({k, q, mapped, residual});
    q = q_next;
    if (residual < fp.delta) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    const std::string what = "threshold fixed point did not converge within " +
                             std::to_string(fp.max_iterations) + " iterations (last residual " +
                             std::to_string(trace.back().residual) + ")";
    throw NoConvergence(what, std::move(trace));
  }

  ThresholdSolution out;
  out.q_T = q;
  out.trace = std::move(trace);
  out.iterations = static_cast<int>(out.trace.size());
  out.policy = solve_hjb(q, config, grid);
  out.density = propagate_density(out.policy, config);
  out.qbar.resize(config.n_steps + 1);
  for (int k = 0; k <= config.n_steps; ++k)
    out.qbar[k] = grid_quantile(out.density.law_at(k), alpha);
  return out;
}

ThresholdPolicy::ThresholdPolicy(const PolicyGrid& policy, const TimeGrid& sim_grid)
    : policy_(&policy), row_time_(sim_grid.n_steps + 1) {
  for (int k = 0; k <= sim_grid.n_steps; ++k) row_time_[k] = sim_grid.time(k);
}

double ThresholdPolicy::operator()(int step, double x) const {
  return policy_->value(row_time_[step], x);
}

}  // namespace qmfg
