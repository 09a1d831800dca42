#pragma once

#include <functional>

#include "ndhmc/types.hpp"

namespace ndhmc {

double mean(ConstSpan xs);
double variance(ConstSpan xs);  // unbiased
double standard_error(ConstSpan xs);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y = intercept + slope * x. Needs at least two
/// distinct x values.
LinearFit least_squares(ConstSpan x, ConstSpan y);

/// Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
double ks_statistic(Vector sample, const std::function<double(double)>& cdf);

/// Spearman rank correlation (average ranks for ties).
double spearman(ConstSpan x, ConstSpan y);

double standard_normal_cdf(double x);

}  // namespace ndhmc
