#include "ndhmc/symplectic.hpp"

#include <algorithm>
#include <cmath>

namespace ndhmc {

double kinetic_energy(ConstSpan p) { return 0.5 * squared_norm(p); }

double hamiltonian(const Potential& potential, const PhasePoint& state) {
  require(state.q.size() == potential.dim() && state.p.size() == potential.dim(),
          "hamiltonian: state dimension mismatch");
  return potential.value(state.q) + kinetic_energy(state.p);
}

namespace {

bool all_finite(ConstSpan v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Position, momentum and the cached potential/gradient at q.
struct Cursor {
  Vector q, p, grad;
  double u = 0.0;
  double h = 0.0;
};

Cursor start_cursor(const Potential& potential, const PhasePoint& state) {
  require(state.q.size() == potential.dim() && state.p.size() == potential.dim(),
          "integrator: state dimension mismatch");
  Cursor c{state.q, state.p, Vector(potential.dim()), 0.0, 0.0};
  c.u = potential.value_and_gradient(c.q, c.grad);
  c.h = c.u + kinetic_energy(c.p);
  return c;
}

// Advances the cursor one leapfrog step. Returns false if the step diverged;
// the cursor then holds the (possibly non-finite) post-step state.
bool advance(const Potential& potential, Cursor& c, double step_size, double cap, Vector& p_half,
             StepRecord* record, bool detect) {
  const std::size_t d = c.q.size();
  const double half = 0.5 * step_size;
  const double h0 = c.h;
  if (record) {
    record->step_size = step_size;
    record->q0 = c.q;
    record->p0 = c.p;
  }
  for (std::size_t k = 0; k < d; ++k) p_half[k] = c.p[k] - half * c.grad[k];
  for (std::size_t k = 0; k < d; ++k) c.q[k] += step_size * p_half[k];
  c.u = potential.value_and_gradient(c.q, c.grad);
  for (std::size_t k = 0; k < d; ++k) c.p[k] = p_half[k] - half * c.grad[k];
  c.h = c.u + kinetic_energy(c.p);
  const double delta = c.h - h0;
  const bool divergent = !std::isfinite(delta) || std::abs(delta) > cap || !all_finite(c.q) ||
                         !all_finite(c.p) || !all_finite(c.grad);
  if (record) {
    record->p_half = p_half;
    record->q1 = c.q;
    record->p1 = c.p;
    record->h0 = h0;
    record->h1 = c.h;
    record->delta_h = delta;
    record->divergent = divergent;
    record->crossings.clear();
    if (detect && !divergent && all_finite(record->q0) && all_finite(p_half))
      record->crossings = detect_crossings(potential, record->q0, p_half, step_size);
  }
  return !divergent;
}

void check_step_size(double step_size) {
  require(step_size > 0.0 && std::isfinite(step_size), "step size must be positive and finite");
}

}  // namespace

std::pair<PhasePoint, StepRecord> leapfrog_step(const Potential& potential, const PhasePoint& state,
                                                double step_size, const IntegratorOptions& options) {
  check_step_size(step_size);
  Cursor c = start_cursor(potential, state);
  Vector p_half(potential.dim());
  StepRecord record;
  advance(potential, c, step_size, options.divergence_cap, p_half, &record,
          options.detect_crossings);
  return {PhasePoint{c.q, c.p}, std::move(record)};
}

TrajectoryTrace trajectory(const Potential& potential, const PhasePoint& state, double step_size,
                           std::size_t steps, const IntegratorOptions& options) {
  check_step_size(step_size);
  require(steps >= 1, "trajectory: need at least one step");
  TrajectoryTrace trace;
  trace.initial = state;
  trace.step_size = step_size;
  trace.steps = steps;
  Cursor c = start_cursor(potential, state);
  const double h_start = c.h;
  Vector p_half(potential.dim());
  trace.records.reserve(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    StepRecord record;
    const bool ok = advance(potential, c, step_size, options.divergence_cap, p_half, &record,
                            options.detect_crossings);
    trace.records.push_back(std::move(record));
    if (!ok || std::abs(c.h - h_start) > options.divergence_cap) {
      trace.divergent = true;
      break;
    }
  }
  trace.final_state = PhasePoint{c.q, c.p};
  trace.total_delta_h = c.h - h_start;
  return trace;
}

Integration integrate(const Potential& potential, const PhasePoint& state, double step_size,
                      std::size_t steps, double divergence_cap) {
  check_step_size(step_size);
  Cursor c = start_cursor(potential, state);
  const double h_start = c.h;
  Vector p_half(potential.dim());
  Integration out;
  for (std::size_t s = 0; s < steps; ++s) {
    if (!advance(potential, c, step_size, divergence_cap, p_half, nullptr, false) ||
        std::abs(c.h - h_start) > divergence_cap) {
      out.divergent = true;
      break;
    }
  }
  out.delta_h = c.h - h_start;
  out.final_state = PhasePoint{std::move(c.q), std::move(c.p)};
  return out;
}

double reverse_check(const Potential& potential, const PhasePoint& state, double step_size,
                     std::size_t steps) {
  if (steps == 0) return 0.0;
  const Integration fwd = integrate(potential, state, step_size, steps);
  require(!fwd.divergent, "reverse_check: forward trajectory diverged");
  PhasePoint back = fwd.final_state;
  for (double& v : back.p) v = -v;
  const Integration rev = integrate(potential, back, step_size, steps);
  double dq = 0.0, dp = 0.0;
  for (std::size_t k = 0; k < state.q.size(); ++k) {
    dq += (rev.final_state.q[k] - state.q[k]) * (rev.final_state.q[k] - state.q[k]);
    dp += (rev.final_state.p[k] + state.p[k]) * (rev.final_state.p[k] + state.p[k]);
  }
  return std::sqrt(dq) + std::sqrt(dp);
}

namespace {

// Determinant by LU with partial pivoting; `a` is n x n row-major.
double determinant(Vector a, std::size_t n) {
  double det = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    if (a[pivot * n + col] == 0.0) return 0.0;
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
      det = -det;
    }
    const double diag = a[col * n + col];
    det *= diag;
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / diag;
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
    }
  }
  return det;
}

std::vector<int> surface_signs(const Potential& potential, ConstSpan q) {
  Vector vals(potential.surface_count());
  potential.surface_values(q, vals);
  std::vector<int> signs(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) signs[i] = sign_of(vals[i]);
  return signs;
}

}  // namespace

double volume_check(const Potential& potential, const PhasePoint& state, double step_size,
                    double h) {
  check_step_size(step_size);
  const std::size_t d = potential.dim();
  require(state.q.size() == d && state.p.size() == d, "volume_check: state dimension mismatch");
  const std::size_t n = 2 * d;
  const bool kinked = potential.surface_count() > 0;

  std::vector<int> base_start, base_end;
  IntegratorOptions opts;
  opts.detect_crossings = kinked;
  auto step = [&](const PhasePoint& s) {
    auto [next, record] = leapfrog_step(potential, s, step_size, opts);
    if (record.divergent) throw StencilCrossesKink("volume_check: step diverged inside stencil");
    if (kinked) {
      if (!record.crossings.empty())
        throw StencilCrossesKink("volume_check: drift crosses a surface inside the stencil");
      const auto start = surface_signs(potential, s.q);
      const auto end = surface_signs(potential, next.q);
      if (base_start.empty()) {
        base_start = start;
        base_end = end;
      } else if (start != base_start || end != base_end) {
        throw StencilCrossesKink("volume_check: stencil straddles a surface");
      }
    }
    return next;
  };

  step(state);
  Vector jac(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    PhasePoint plus = state, minus = state;
    Vector& vp = j < d ? plus.q : plus.p;
    Vector& vm = j < d ? minus.q : minus.p;
    vp[j % d] += h;
    vm[j % d] -= h;
    const PhasePoint fp = step(plus);
    const PhasePoint fm = step(minus);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = i < d ? fp.q[i] : fp.p[i - d];
      const double b = i < d ? fm.q[i] : fm.p[i - d];
      jac[i * n + j] = (a - b) / (2.0 * h);
    }
  }
  return std::abs(determinant(std::move(jac), n) - 1.0);
}

std::vector<CrossingEvent> detect_crossings(const Potential& potential, ConstSpan q0,
                                            ConstSpan p_half, double step_size) {
  const std::size_t n_surf = potential.surface_count();
  if (n_surf == 0) return {};
  check_step_size(step_size);
  const std::size_t d = potential.dim();
  require(q0.size() == d && p_half.size() == d, "detect_crossings: dimension mismatch");

  auto point_at = [&](double t) {
    Vector z(d);
    for (std::size_t k = 0; k < d; ++k) z[k] = q0[k] + t * p_half[k];
    return z;
  };

  struct Root {
    double time;
    std::size_t surface;
    int before;
    int after;
  };
  std::vector<Root> roots;

  Vector f0(n_surf), f1(n_surf);
  potential.surface_values(q0, f0);
  potential.surface_values(point_at(step_size), f1);

  bool any_nonaffine = false;
  for (std::size_t s = 0; s < n_surf; ++s) {
    if (!potential.surface_is_affine(s)) {
      any_nonaffine = true;
      continue;
    }
    const int a = sign_of(f0[s]), b = sign_of(f1[s]);
    if (a * b < 0) roots.push_back({step_size * (f0[s] / (f0[s] - f1[s])), s, a, b});
  }

  if (any_nonaffine) {
    const std::size_t K = kCrossingScanIntervals;
    std::vector<Vector> grid(K + 1);
    grid[0] = f0;
    grid[K] = f1;
    for (std::size_t k = 1; k < K; ++k) {
      grid[k].resize(n_surf);
      potential.surface_values(point_at(step_size * static_cast<double>(k) / K), grid[k]);
    }
    const double tol = 1e-12 * step_size;
    for (std::size_t s = 0; s < n_surf; ++s) {
      if (potential.surface_is_affine(s)) continue;
      int last_sign = 0;
      std::size_t last_node = 0;
      for (std::size_t k = 0; k <= K; ++k) {
        const int sg = sign_of(grid[k][s]);
        if (sg == 0) continue;
        if (last_sign != 0 && sg != last_sign) {
          double lo = step_size * static_cast<double>(last_node) / K;
          double hi = step_size * static_cast<double>(k) / K;
          while (hi - lo > tol) {
            const double mid = 0.5 * (lo + hi);
            const int ms = sign_of(potential.surface_value(point_at(mid), s));
            if (ms == last_sign) {
              lo = mid;
            } else if (ms == sg) {
              hi = mid;
            } else {
              lo = hi = mid;
            }
          }
          roots.push_back({0.5 * (lo + hi), s, last_sign, sg});
        }
        last_sign = sg;
        last_node = k;
      }
    }
  }

  std::sort(roots.begin(), roots.end(), [](const Root& a, const Root& b) {
    return a.time != b.time ? a.time < b.time : a.surface < b.surface;
  });

  std::vector<CrossingEvent> events;
  events.reserve(roots.size());
  for (const Root& r : roots) {
    CrossingEvent e;
    e.time = r.time;
    e.point = point_at(r.time);
    e.surface = r.surface;
    e.sign_before = r.before;
    e.sign_after = r.after;
    e.grad_before.resize(d);
    e.grad_after.resize(d);
    potential.one_sided_gradients(e.point, r.surface, r.before, r.after, e.grad_before, e.grad_after);
    e.jump.resize(d);
    for (std::size_t k = 0; k < d; ++k) e.jump[k] = e.grad_after[k] - e.grad_before[k];
    events.push_back(std::move(e));
  }
  return events;
}

}  // namespace ndhmc
