#include "qmfg/quantiles.hpp"

#include <algorithm>
#include <cmath>

namespace qmfg {

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

namespace {

// Wichura's PPND16 rational approximations (relative accuracy ~1e-16).
double ppnd16(double p) {
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                             6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                           1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                         1.3314166789178437745e2) * r + 3.3871328727963666080e0);
    const double den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                             3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                           5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                         4.2313330701600911252e1) * r + 1.0);
    return q * num / den;
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    const double num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                             2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                           3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                         4.63033784615654529590e0) * r + 1.42343711074968357734e0);
    const double den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                             1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                           6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                         2.05319162663775882187e0) * r + 1.0);
    x = num / den;
  } else {
    r -= 5.0;
    const double num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                             1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                           2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                         5.46378491116411436990e0) * r + 6.65790464350110377720e0);
    const double den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                             1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                           1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                         5.99832206555887937690e-1) * r + 1.0);
    x = num / den;
  }
  return (q < 0.0) ? -x : x;
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw AlphaOutOfRange("alpha must lie strictly inside (0,1), got " + std::to_string(alpha));
}

}  // namespace

double std_normal_quantile(double alpha) {
  check_alpha(alpha);
  double x = ppnd16(alpha);
  // One Newton correction against the erfc-based CDF pins the 1e-12 contract.
  const double pdf = std_normal_pdf(x);
  if (pdf > 0.0) x -= (std_normal_cdf(x) - alpha) / pdf;
  return x;
}

double empirical_quantile(std::span<const double> values, double alpha) {
  check_alpha(alpha);
  if (values.empty()) throw EmptySample("empirical_quantile needs a nonempty sample");
  for (double v : values)
    if (!std::isfinite(v)) throw NonFiniteSample("sample contains a non-finite value");

  const auto n = static_cast<long>(values.size());
  // smallest k with k/n >= alpha, evaluated with the same arithmetic as the definition
  long k = static_cast<long>(std::ceil(alpha * static_cast<double>(n)));
  k = std::clamp(k, 1L, n);
  while (k > 1 && static_cast<double>(k - 1) / static_cast<double>(n) >= alpha) --k;
  while (k < n && static_cast<double>(k) / static_cast<double>(n) < alpha) ++k;

  std::vector<double> copy(values.begin(), values.end());
  std::nth_element(copy.begin(), copy.begin() + (k - 1), copy.end());
  return copy[k - 1];
}

double gaussian_quantile(double mean, double variance, double alpha) {
  check_alpha(alpha);
  if (!(variance >= 0.0))
    throw NegativeVariance("variance must be nonnegative, got " + std::to_string(variance));
  if (variance == 0.0) return mean;
  return mean + std_normal_quantile(alpha) * std::sqrt(variance);
}

double grid_quantile(const GriddedLaw& law, double alpha) {
  check_alpha(alpha);
  const auto n = law.x.size();
  if (n == 0 || law.mass.size() != n) throw InvalidLaw("law needs matching nonempty x and mass arrays");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(law.mass[i] >= 0.0) || !std::isfinite(law.mass[i]))
      throw InvalidLaw("cell mass must be finite and nonnegative");
    if (i + 1 < n && !(law.x[i + 1] > law.x[i])) throw InvalidLaw("x grid must be strictly increasing");
    total += law.mass[i];
  }
  if (std::fabs(total - 1.0) > 1e-6) throw InvalidLaw("cell masses must sum to 1 within 1e-6");
  if (n == 1) return law.x[0];

  const double target = alpha * total;
  double cum = 0.0;
  std::size_t cross = n;  // first cell whose cumulative mass reaches the target
  double cum_before = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cum_before = cum;
    cum += law.mass[i];
    if (cum >= target && law.mass[i] > 0.0) {
      cross = i;
      break;
    }
  }
  if (cross == n) {  // rounding pushed the target past the last positive cell
    for (std::size_t i = n; i-- > 0;)
      if (law.mass[i] > 0.0) return law.x[i];
    throw InvalidLaw("law has no positive mass");
  }
  const double lo = (cross == 0) ? law.x[0] - 0.5 * (law.x[1] - law.x[0])
                                 : 0.5 * (law.x[cross - 1] + law.x[cross]);
  const double hi = (cross + 1 == n) ? law.x[n - 1] + 0.5 * (law.x[n - 1] - law.x[n - 2])
                                     : 0.5 * (law.x[cross] + law.x[cross + 1]);
  return lo + (target - cum_before) / law.mass[cross] * (hi - lo);
}

}  // namespace qmfg
