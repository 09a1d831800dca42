#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ndhmc/proxy.hpp"

namespace ndhmc {

/// Limiting acceptance 2 * Phi(-l^order * sqrt(sigma) / 2) of HMC on a
/// d -> infinity i.i.d. product target, for an integrator whose global
/// energy error is O(eps^order) (order 2: smooth leapfrog, order 1:
/// piecewise-affine components).
double acceptance_limit(int order, double l, double sigma);

struct EfficiencyCurve {
  int order = 2;
  double sigma = 1.0;
  Vector l;
  Vector acceptance;
  Vector efficiency;  // l * a(l)
  double l_opt = 0.0;
  double a_opt = 0.0;
  double efficiency_opt = 0.0;
};

/// l * a(l) on a log grid over [l_min, l_max], with the maximizer refined
/// by bisection on the analytic derivative.
EfficiencyCurve efficiency_curve(int order, double sigma, std::size_t grid_points = 1000,
                                 double l_min = 1e-3, double l_max = 10.0);

/// Acceptance interval on which efficiency stays >= fraction * optimum.
struct EfficiencyBand {
  double fraction = 0.95;
  double l_low = 0.0;
  double l_high = 0.0;
  double acceptance_low = 0.0;   // a(l_high)
  double acceptance_high = 0.0;  // a(l_low)
};

EfficiencyBand efficiency_band(const EfficiencyCurve& curve, double fraction = 0.95);

struct SigmaEstimate {
  double step_size = 0.0;
  double travel_time = 0.0;
  std::size_t steps = 0;
  std::size_t n = 0;
  double mean_delta = 0.0;     // E[Delta]
  double mean_sq_delta = 0.0;  // E[Delta^2]
  double sigma = 0.0;          // E[Delta^2] / eps^2
  double mu = 0.0;             // E[Delta] / eps^2
  double sigma_order2 = 0.0;   // E[Delta^2] / eps^4
};

/// Monte Carlo moments of the one-dimensional energy error Delta of a full
/// proposal (L = round(T / eps) leapfrog steps) from a stationary start
/// q ~ exp(-V)/Z, p ~ N(0, 1).
SigmaEstimate estimate_sigma(const Target1D& target, double step_size, std::size_t n,
                             double travel_time, std::uint64_t seed, std::size_t workers = 1);

struct ScalingRow {
  std::size_t dim = 0;
  double step_size = 0.0;
  std::size_t steps = 0;
  double acceptance = 0.0;  // mean of min(1, exp(-delta H))
  double acceptance_se = 0.0;
  std::size_t n_divergent = 0;
};

/// Average acceptance of full HMC proposals on the d-fold product of
/// `component` with eps = l * d^(-exponent), from independent stationary
/// starts.
std::vector<ScalingRow> scaling_experiment(const PiecewiseAffine1D& component, double l,
                                           const std::vector<std::size_t>& dims,
                                           std::size_t samples_per_dim, std::uint64_t seed,
                                           double travel_time = 1.0, double exponent = 0.5,
                                           std::size_t workers = 1);

void write_efficiency_csv(std::ostream& out, const EfficiencyCurve& curve);
void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows);

}  // namespace ndhmc
