#pragma once

#include <span>
#include <vector>

#include "qmfg/errors.hpp"

namespace qmfg {

double std_normal_cdf(double x);
double std_normal_pdf(double x);

/// Inverse standard-normal CDF; |Phi(result) - alpha| <= 1e-12.
double std_normal_quantile(double alpha);

/// Smallest sample value x such that the fraction of values <= x is at
/// least alpha (the ceil(alpha*N)-th order statistic). Rejects NaN/inf.
double empirical_quantile(std::span<const double> values, double alpha);

/// mean + X_alpha * sqrt(variance).
double gaussian_quantile(double mean, double variance, double alpha);

/// Discretized law on a state grid: `x` holds cell centers (strictly
/// increasing), `mass` the cell probabilities (sum within 1e-6 of 1).
struct GriddedLaw {
  std::vector<double> x;
  std::vector<double> mass;
};

/// Quantile of a gridded law with linear interpolation inside the crossing
/// cell (cell edges sit midway between adjacent centers). A single-cell law
/// is treated as a point mass at its center.
double grid_quantile(const GriddedLaw& law, double alpha);

}  // namespace qmfg
