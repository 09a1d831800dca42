#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ndhmc/potential.hpp"

namespace ndhmc {

struct PhasePoint {
  Vector q;
  Vector p;
};

/// One incidence of a drift segment q0 + t * p_half with a surface.
struct CrossingEvent {
  double time = 0.0;  // in (0, step size)
  Vector point;
  std::size_t surface = 0;
  int sign_before = 0;
  int sign_after = 0;
  Vector grad_before;
  Vector grad_after;
  Vector jump;  // grad_after - grad_before
};

struct StepRecord {
  double step_size = 0.0;
  Vector q0, p0, p_half, q1, p1;
  double h0 = 0.0;
  double h1 = 0.0;
  double delta_h = 0.0;
  std::vector<CrossingEvent> crossings;
  bool divergent = false;
};

struct TrajectoryTrace {
  PhasePoint initial;
  double step_size = 0.0;
  std::size_t steps = 0;  // requested L
  std::vector<StepRecord> records;
  PhasePoint final_state;
  double total_delta_h = 0.0;
  bool divergent = false;
};

struct IntegratorOptions {
  bool detect_crossings = true;
  /// A step is divergent if anything is non-finite or |delta H| exceeds this.
  double divergence_cap = 1e6;
};

/// Number of equal subintervals scanned for roots of non-affine surfaces.
inline constexpr std::size_t kCrossingScanIntervals = 64;

double kinetic_energy(ConstSpan p);
double hamiltonian(const Potential& potential, const PhasePoint& state);

/// Half kick, drift, half kick.
std::pair<PhasePoint, StepRecord> leapfrog_step(const Potential& potential, const PhasePoint& state,
                                                double step_size,
                                                const IntegratorOptions& options = {});

/// L chained leapfrog steps; stops at the first divergent step.
TrajectoryTrace trajectory(const Potential& potential, const PhasePoint& state, double step_size,
                           std::size_t steps, const IntegratorOptions& options = {});

/// Lightweight integration for samplers: no per-step records or crossing
/// detection. Arithmetic is identical to `trajectory`.
struct Integration {
  PhasePoint final_state;
  double delta_h = 0.0;
  bool divergent = false;
};
Integration integrate(const Potential& potential, const PhasePoint& state, double step_size,
                      std::size_t steps, double divergence_cap = 1e6);

/// Integrates L steps forward, negates the momentum, integrates L steps
/// again and returns |q_rec - q0| + |p_rec + p0|.
double reverse_check(const Potential& potential, const PhasePoint& state, double step_size,
                     std::size_t steps);

/// Raised by volume_check when a kink lies inside the finite-difference
/// stencil; the caller should pick another point.
class StencilCrossesKink : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// |det J - 1| for the Jacobian of one leapfrog step, by central
/// differences with perturbation `h`.
double volume_check(const Potential& potential, const PhasePoint& state, double step_size,
                    double h = 1e-5);

/// Crossings of the drift q0 + t * p_half, t in (0, step_size), with every
/// surface of the potential. Affine surfaces are solved exactly; others are
/// scanned on kCrossingScanIntervals subintervals and bisected. Events are
/// sorted by time, ties by surface index. A root of even multiplicity
/// (tangential touch) is not reported.
std::vector<CrossingEvent> detect_crossings(const Potential& potential, ConstSpan q0,
                                            ConstSpan p_half, double step_size);

// Trace export. CSV columns: step,H0,H1,deltaH,n_crossings,divergent.
void write_trace_csv(std::ostream& out, const TrajectoryTrace& trace);
std::string trace_to_json(const Potential& potential, const TrajectoryTrace& trace, int indent = -1);

}  // namespace ndhmc
