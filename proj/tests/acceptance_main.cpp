// Acceptance suite: one check per shipping criterion, runnable singly
// (`qmfg_acceptance <n>`) or all together (no argument). Prints one
// [PASS]/[FAIL] line per criterion with the measured numbers and returns
// the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "qmfg/population_sim.hpp"
#include "qmfg/quantiles.hpp"
#include "qmfg/rng.hpp"
#include "qmfg/target_mfg.hpp"
#include "qmfg/threshold_mfg.hpp"

using namespace qmfg;

namespace {

struct Context {
  RunConfig config = table1_defaults();

  const FbodeSolution& fbode() {
    if (!fbode_) fbode_ = solve_fbode(config);
    return *fbode_;
  }
  const SpatialGrid& grid() {
    if (!grid_) grid_ = SpatialGrid::cover(config, fbode().qbar.back(), 1024);
    return *grid_;
  }
  const ThresholdSolution& threshold() {
    if (!threshold_) threshold_ = fixed_point_solve(config, FixedPointConfig{}, grid());
    return *threshold_;
  }

 private:
  std::optional<FbodeSolution> fbode_;
  std::optional<SpatialGrid> grid_;
  std::optional<ThresholdSolution> threshold_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool report(int criterion, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
  std::fflush(stdout);
  return ok;
}

std::string fmt(const char* pattern, auto... values) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), pattern, values...);
  return buf;
}

// 1. FBODE correctness: closed-form Riccati vs integrator, recomputed pi,
//    mean-field consistency, all inside one second.
bool criterion1(Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const FbodeSolution sol = solve_fbode(ctx.config);

  double eta_sup = 0.0;
  for (std::size_t k = 0; k < sol.t.size(); ++k)
    eta_sup = std::max(eta_sup, std::fabs(sol.eta[k] - riccati_closed_form(ctx.config.params, sol.t[k])));

  // re-integrate pi from its own quadratic equation and compare with -eta
  const ModelParams& p = ctx.config.params;
  const double c = p.b * p.b / p.r;
  const int n = ctx.config.n_steps;
  const double h = p.T / n;
  std::vector<double> pi(n + 1);
  pi[n] = -p.lambda;
  const auto rhs = [&](double t, double y) {
    return c * y * y + 2.0 * c * riccati_closed_form(p, t) * y;
  };
  for (int k = n; k > 0; --k) {
    const double t = k * h;
    const double k1 = rhs(t, pi[k]);
    const double k2 = rhs(t - 0.5 * h, pi[k] - 0.5 * h * k1);
    const double k3 = rhs(t - 0.5 * h, pi[k] - 0.5 * h * k2);
    const double k4 = rhs(t - h, pi[k] - h * k3);
    pi[k - 1] = pi[k] - h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  double pi_sup = 0.0;
  for (int k = 0; k <= n; ++k) pi_sup = std::max(pi_sup, std::fabs(pi[k] - sol.pi[k]));

  double consistency = 0.0;
  for (std::size_t k = 0; k < sol.t.size(); ++k)
    consistency = std::max(consistency,
                           std::fabs(sol.qbar[k] - (sol.m[k] + sol.x_alpha * std::sqrt(sol.v[k]))));

  const double elapsed = seconds_since(t0);
  const bool ok = eta_sup <= 1e-8 && pi_sup <= 1e-8 && consistency <= 1e-6 && elapsed < 1.0;
  return report(1, ok,
                fmt("fbode: |eta-closed|=%.2e (<=1e-8), |pi+eta|=%.2e (<=1e-8), "
                    "consistency=%.2e (<=1e-6), runtime=%.3fs (<1s)",
                    eta_sup, pi_sup, consistency, elapsed));
}

// 2. Threshold fixed point converges from warm and cold starts within the
//    iteration and runtime budget, to the same threshold within delta.
bool criterion2(Context& ctx) {
  const FixedPointConfig fp;  // delta 1e-4, rho 0.5, cap 50
  const auto t0 = std::chrono::steady_clock::now();
  const ThresholdSolution warm = fixed_point_solve(ctx.config, fp, ctx.grid());
  const double warm_s = seconds_since(t0);

  const double cold_q0 = gaussian_quantile(ctx.config.params.m0,
                                           ctx.config.params.nu * ctx.config.params.nu,
                                           ctx.config.alpha.alpha);
  const auto t1 = std::chrono::steady_clock::now();
  const ThresholdSolution cold = fixed_point_solve(ctx.config, fp, ctx.grid(), cold_q0);
  const double cold_s = seconds_since(t1);

  const bool ok = warm.iterations <= 50 && cold.iterations <= 50 &&
                  std::fabs(warm.q_T - cold.q_T) <= fp.delta && warm_s < 60.0 && cold_s < 60.0;
  return report(2, ok,
                fmt("fixed point: warm %d it (%.1fs), cold %d it (%.1fs), "
                    "|q_warm-q_cold|=%.2e (<=1e-4), q_T=%.6f",
                    warm.iterations, warm_s, cold.iterations, cold_s,
                    std::fabs(warm.q_T - cold.q_T), warm.q_T));
}

// 3. Formulation agreement: threshold fixed point within 2% of the
//    target-based terminal quantile.
bool criterion3(Context& ctx) {
  const double q_target = ctx.fbode().qbar.back();
  const double q_threshold = ctx.threshold().q_T;
  const double rel = std::fabs(q_threshold - q_target) / std::fabs(q_target);
  return report(3, rel <= 0.02,
                fmt("formulation agreement: target %.6f vs threshold %.6f, relative "
                    "difference %.4f (<=0.02)",
                    q_target, q_threshold, rel));
}

// 4. The adjoint process recovered from the policy is a martingale along
//    simulated optimal paths: E[y_T | (t,x)] = y(t,x) within 3 SE at five
//    checkpoints, 10^4 paths each.
bool criterion4(Context& ctx) {
  const ThresholdSolution& sol = ctx.threshold();
  const ModelParams& p = ctx.config.params;
  const double q = sol.q_T;
  const int n_paths = 10000;
  const int substeps = 4;  // finer Euler step keeps the weak error inside the band
  const double dt = ctx.config.time_grid().dt() / substeps;
  const struct { double t, x; } checkpoints[5] = {
      {0.1, 0.3}, {0.3, 0.6}, {0.5, 0.9}, {0.7, 1.2}, {0.9, 1.4}};

  bool ok = true;
  std::string detail = "martingale residual/SE:";
  int tag = 0;
  for (const auto& cp : checkpoints) {
    const double y_here = -(p.r / p.b) * sol.policy.value(cp.t, cp.x);
    const int first = static_cast<int>(std::round(cp.t / dt));
    const int last = ctx.config.n_steps * substeps;
    double sum = 0.0, sum2 = 0.0;
    for (int path = 0; path < n_paths; ++path) {
      NormalStream stream(ctx.config.seed, static_cast<std::uint32_t>(1000 + tag),
                          static_cast<std::uint32_t>(path));
      double x = cp.x;
      for (int k = first; k < last; ++k) {
        const double t = k * dt;
        const double u = sol.policy.value(t, x);
        x += (p.gamma(t) + p.b * u) * dt + p.sigma * std::sqrt(dt) * stream.next();
      }
      const double y_T = (x < q) ? p.lambda * (x - q) : 0.0;
      sum += y_T;
      sum2 += y_T * y_T;
    }
    const double mean = sum / n_paths;
    const double se = std::sqrt((sum2 / n_paths - mean * mean) / n_paths);
    const double z = std::fabs(mean - y_here) / se;
    ok = ok && z <= 3.0;
    detail += fmt(" %.2f", z);
    ++tag;
  }
  return report(4, ok, detail + " (each <=3)");
}

// 5. Qualitative policy shape on the converged threshold policy.
bool criterion5(Context& ctx) {
  const PolicyGrid& policy = ctx.threshold().policy;
  const SpatialGrid& grid = policy.space_grid;
  const double q = ctx.threshold().q_T;
  const double sigma = ctx.config.params.sigma, T = ctx.config.params.T;

  bool nonnegative = true, monotone_x = true, vanishes = true, intensifies = true;
  double worst_tail = 0.0;
  for (int k = 0; k <= policy.time_grid.n_steps; ++k) {
    const double t = policy.time_grid.time(k);
    const double band = 6.0 * sigma * std::sqrt(T - t);
    for (int j = 0; j < grid.n_cells; ++j) {
      const double u = policy.at(k, j);
      const double x = grid.center(j);
      if (u < 0.0) nonnegative = false;
      if (j + 1 < grid.n_cells && x + grid.dx() < q && policy.at(k, j + 1) > u + 1e-9)
        monotone_x = false;
      if (x - q >= band) {
        worst_tail = std::max(worst_tail, u);
        if (u > 1e-6) vanishes = false;
      }
      if (k + 1 <= policy.time_grid.n_steps && x <= q - 2.0 * sigma * std::sqrt(T - t) &&
          policy.at(k + 1, j) < u - 1e-9)
        intensifies = false;
    }
  }
  const bool ok = nonnegative && monotone_x && vanishes && intensifies;
  return report(5, ok,
                fmt("policy shape: nonnegative=%d, monotone-below-threshold=%d, "
                    "tail max=%.2e (<=1e-6), intensifies-in-t=%d",
                    nonnegative, monotone_x, worst_tail, intensifies));
}

// 6. Sample-quantile central limit behavior under the target policy.
bool criterion6(Context& ctx) {
  const FbodeSolution& sol = ctx.fbode();
  const double qbar_T = sol.qbar.back();
  const double p_at_q = equilibrium_density_value(sol, ctx.config.params.T, qbar_T);
  const CltReport rep = clt_experiment(ctx.config, TargetPolicy(sol, ctx.config.time_grid()),
                                       qbar_T, p_at_q);
  const double mean_dev = std::fabs(rep.mean_quantile - qbar_T);
  const double sd_rel = std::fabs(rep.sd_quantile - rep.predicted_sd_classical) /
                        rep.predicted_sd_classical;
  const bool ok = mean_dev <= 3.0 * rep.standard_error && sd_rel <= 0.15;
  return report(6, ok,
                fmt("clt: |mean-qbar_T|=%.2e (<=3SE=%.2e), sd=%.5f vs classical %.5f "
                    "(rel %.3f<=0.15; paper-literal scaling %.5f, closer=%s)",
                    mean_dev, 3.0 * rep.standard_error, rep.sd_quantile,
                    rep.predicted_sd_classical, sd_rel, rep.predicted_sd_paper,
                    rep.closer_scaling));
}

// 7. Rate check across population sizes: dispersion slope -0.5 +- 0.1 and
//    the cost-gap slope inside [-0.75, -0.25].
bool criterion7(Context& ctx) {
  const FbodeSolution& sol = ctx.fbode();
  const std::vector<int> n_values{250, 1000, 4000};
  const NashGapReport rep = nash_gap_experiment(ctx.config, TargetPolicy(sol, ctx.config.time_grid()),
                                                n_values, limiting_cost(sol, ctx.config));
  const bool sd_ok = std::fabs(rep.sd_slope + 0.5) <= 0.1;
  const bool gap_ok = rep.gap_slope >= -0.75 && rep.gap_slope <= -0.25;
  std::string gaps;
  for (const auto& pt : rep.points) gaps += fmt(" %.2e", pt.gap);
  return report(7, sd_ok && gap_ok,
                fmt("rate: sd slope %.3f (in -0.5+-0.1), gap slope %.3f (in [-0.75,-0.25]); "
                    "gaps(N=250,1000,4000):%s, J_lim=%.6f",
                    rep.sd_slope, rep.gap_slope, gaps.c_str(), rep.limiting_cost));
}

// 8. Terminal quantile strictly increasing in alpha for both formulations;
//    the median path is flat at m0 for the target formulation.
bool criterion8(Context& ctx) {
  const std::vector<double> alphas{0.25, 0.5, 0.75, 0.9, 0.95};
  bool target_increasing = true, threshold_increasing = true;
  double prev_t = 0.0, prev_h = 0.0;
  std::string values = "target/threshold q_T:";
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    RunConfig config = ctx.config;
    config.alpha.alpha = alphas[i];
    const FbodeSolution sol = solve_fbode(config);
    const SpatialGrid grid = SpatialGrid::cover(config, sol.qbar.back(), 1024);
    const ThresholdSolution thr = fixed_point_solve(config, FixedPointConfig{}, grid);
    if (i > 0 && sol.qbar.back() <= prev_t) target_increasing = false;
    if (i > 0 && thr.q_T <= prev_h) threshold_increasing = false;
    prev_t = sol.qbar.back();
    prev_h = thr.q_T;
    values += fmt(" %.3f/%.3f", sol.qbar.back(), thr.q_T);
  }

  RunConfig median = ctx.config;
  median.alpha.alpha = 0.5;
  const FbodeSolution msol = solve_fbode(median);
  double flat = 0.0;
  for (double q : msol.qbar) flat = std::max(flat, std::fabs(q - median.params.m0));

  const bool ok = target_increasing && threshold_increasing && flat <= 1e-6;
  return report(8, ok,
                fmt("monotone sweep: target=%d threshold=%d, median flatness %.2e (<=1e-6); %s",
                    target_increasing, threshold_increasing, flat, values.c_str()));
}

// 9. Density propagation hygiene: conservation before renormalization and
//    heat-kernel variance for the uncontrolled diffusion.
bool criterion9(Context& ctx) {
  PolicyGrid zero;
  zero.time_grid = ctx.config.time_grid();
  zero.space_grid = ctx.grid();
  zero.q_T = 0.0;
  zero.u_star.assign(static_cast<std::size_t>(ctx.config.n_steps + 1) * ctx.grid().n_cells, 0.0);
  const DensityGrid free_density = propagate_density(zero, ctx.config);

  double worst_var = 0.0;
  const double nu2 = ctx.config.params.nu * ctx.config.params.nu;
  const double sig2 = ctx.config.params.sigma * ctx.config.params.sigma;
  for (int k : {250, 500, 750, 1000}) {
    const double t = free_density.time_grid.time(k);
    const double expected = nu2 + sig2 * t;
    worst_var = std::max(worst_var, std::fabs(free_density.slice_variance(k) - expected) / expected);
  }

  const double controlled_mass = ctx.threshold().density.max_renorm_correction;
  const bool ok = free_density.max_renorm_correction <= 1e-6 && controlled_mass <= 1e-6 &&
                  worst_var <= 0.005;
  return report(9, ok,
                fmt("density hygiene: mass defect free=%.2e controlled=%.2e (<=1e-6), "
                    "variance error %.4f (<=0.005)",
                    free_density.max_renorm_correction, controlled_mass, worst_var));
}

// 10. Distribution match: empirical terminal states vs the analytic
//     gaussian law, KS below the 1% critical value in >=95% of runs.
bool criterion10(Context& ctx) {
  const FbodeSolution& sol = ctx.fbode();
  const double m_T = sol.m.back(), v_T = sol.v.back();
  const int reps = 200;
  const double critical = 1.6276 / std::sqrt(static_cast<double>(ctx.config.n_agents));
  int below = 0;
  const TargetPolicy policy(sol, ctx.config.time_grid());
  for (int j = 0; j < reps; ++j) {
    SimOptions opts;
    opts.replication = static_cast<std::uint32_t>(j);
    const PopulationRun run = simulate_population(ctx.config, policy, opts);
    if (ks_statistic(run.terminal_states, m_T, v_T) < critical) ++below;
  }
  const double share = static_cast<double>(below) / reps;
  return report(10, share >= 0.95,
                fmt("distribution match: KS below 1%% critical in %.1f%% of %d replications (>=95%%)",
                    100.0 * share, reps));
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  bool (*criteria[])(Context&) = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                  criterion6, criterion7, criterion8, criterion9, criterion10};
  int failures = 0;
  if (argc > 1) {
    const int k = std::atoi(argv[1]);
    if (k < 1 || k > 10) {
      std::fprintf(stderr, "usage: %s [criterion 1..10]\n", argv[0]);
      return 64;
    }
    failures += criteria[k - 1](ctx) ? 0 : 1;
  } else {
    for (auto* criterion : criteria) failures += criterion(ctx) ? 0 : 1;
  }
  return failures;
}
