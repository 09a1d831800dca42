#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <vector>

#include "ndhmc/symplectic.hpp"

namespace ndhmc {

/// p_half . sum_i (eps/2 - eps_i) * jump_i over the step's crossings. This
/// is the leading term of the energy error of a step that crosses kinks.
double predict_local_error(const StepRecord& record);

/// Least-squares fit of log|error| against log(eps). Errors at or below
/// `noise_floor` (and non-finite ones) are excluded as float noise.
struct ErrorOrderFit {
  Vector epsilons;
  Vector abs_errors;
  std::vector<bool> used;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

inline constexpr double kErrorNoiseFloor = 1e-14;

ErrorOrderFit fit_error_order(ConstSpan epsilons, ConstSpan abs_errors,
                              double noise_floor = kErrorNoiseFloor);

/// eps_k = base * 2^k for k = first..first+count-1.
Vector dyadic_step_sizes(double base = 1e-4, int first = 0, int count = 8);

/// Raised when a forced-crossing study cannot be set up from the anchor.
class ConstructionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LocalRegime { Smooth, Crossing };

struct LocalErrorOptions {
  LocalRegime regime = LocalRegime::Smooth;
  /// Crossing time as a fraction of the step, held fixed across eps.
  double crossing_fraction = 0.25;
  /// Length of the ray anchor.q + t * anchor.p searched for a surface.
  double probe_time = 1.0;
};

struct LocalErrorStudy {
  Vector epsilons;
  std::vector<PhasePoint> starts;
  std::vector<StepRecord> records;
  Vector measured;   // delta H per step
  Vector predicted;  // predict_local_error per step
  Vector crossing_fraction;  // eps_1 / eps of the targeted surface (crossing regime)
  std::size_t surface = 0;
  ErrorOrderFit measured_fit;
  /// Fit of |measured - predicted|. Slope is +inf when fewer than two
  /// residuals exceed the noise floor (prediction exact).
  ErrorOrderFit residual_fit;
};

/// One leapfrog step per eps. Smooth regime: every step starts at the
/// anchor. Crossing regime: the first surface point z hit by the ray
/// anchor.q + t * anchor.p is located; for each eps the start is
/// q0 = z - phi * eps * v, p0 = v + (eps / 2) grad U(q0) with v = anchor.p,
/// so p_half = v and the drift meets the surface at t = phi * eps.
LocalErrorStudy local_error_order(const Potential& potential, const PhasePoint& anchor,
                                  ConstSpan epsilons, const LocalErrorOptions& options = {});

struct GlobalErrorStudy {
  double travel_time = 0.0;
  Vector epsilons;
  std::vector<std::size_t> steps;
  Vector mean_abs_delta_h;  // over starts, divergent runs excluded
  std::vector<double> mean_crossings;
  std::vector<bool> divergent;  // any start diverged at this eps
  ErrorOrderFit fit;
};

/// Total |delta H| of trajectories with L = round(T / eps) for each eps,
/// from the same starts. With several starts, the fit uses the mean |delta H|
/// across starts at each eps.
GlobalErrorStudy global_error_order(const Potential& potential, const std::vector<PhasePoint>& starts,
                                    double travel_time, ConstSpan epsilons,
                                    bool count_crossings = true);

using StateSampler = std::function<PhasePoint(std::mt19937_64&)>;

struct CrossingTimeStats {
  double step_size = 0.0;
  Vector a_grid;
  Vector fractions;
  std::size_t n_samples = 0;
  std::size_t n_single = 0;
  std::size_t n_multiple = 0;
  Vector single_times;  // eps_1 / eps for every single-crossing step, in sample order
};

/// Fraction of single-crossing steps whose crossing time eps_1 / eps lies in
/// ((1 - a) / 2, (1 + a) / 2), for each a. Samples are processed in fixed
/// chunks with seed-derived streams, so results do not depend on `workers`.
CrossingTimeStats crossing_time_stats(const Potential& potential, const StateSampler& sampler,
                                      double step_size, std::size_t n_samples, ConstSpan a_grid,
                                      std::uint64_t seed, std::size_t workers = 1);

void write_fit_csv(std::ostream& out, const ErrorOrderFit& fit);
void write_crossing_stats_csv(std::ostream& out, const CrossingTimeStats& stats);

}  // namespace ndhmc
