#include "ndhmc/nondiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "ndhmc/csv.hpp"
#include "ndhmc/parallel.hpp"
#include "ndhmc/stats.hpp"

namespace ndhmc {

double predict_local_error(const StepRecord& record) {
  if (record.crossings.empty()) return 0.0;
  const double eps = record.step_size;
  Vector acc(record.p_half.size(), 0.0);
  for (const CrossingEvent& e : record.crossings) {
    const double w = 0.5 * eps - e.time;
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += w * e.jump[k];
  }
  return dot(record.p_half, acc);
}

ErrorOrderFit fit_error_order(ConstSpan epsilons, ConstSpan abs_errors, double noise_floor) {
  require(epsilons.size() == abs_errors.size(), "fit_error_order: length mismatch");
  ErrorOrderFit fit;
  fit.epsilons.assign(epsilons.begin(), epsilons.end());
  fit.abs_errors.assign(abs_errors.begin(), abs_errors.end());
  fit.used.assign(epsilons.size(), false);
  Vector x, y;
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    const double e = std::abs(abs_errors[i]);
    if (!std::isfinite(e) || e <= noise_floor || !(epsilons[i] > 0.0)) continue;
    fit.used[i] = true;
    x.push_back(std::log(epsilons[i]));
    y.push_back(std::log(e));
  }
  require(x.size() >= 2, "fit_error_order: fewer than two usable points");
  const LinearFit lf = least_squares(x, y);
  fit.slope = lf.slope;
  fit.intercept = lf.intercept;
  fit.r_squared = lf.r_squared;
  return fit;
}

Vector dyadic_step_sizes(double base, int first, int count) {
  Vector out;
  for (int k = first; k < first + count; ++k) out.push_back(std::ldexp(base, k));
  return out;
}

namespace {

// Start whose half-kicked momentum is the anchor momentum v, so the drift
// q0 + t * v meets the surface at exactly t = phi * eps:
// q0 = z - phi * eps * v, p0 = v + (eps / 2) * grad U(q0).
PhasePoint forced_crossing_start(const Potential& potential, const PhasePoint& anchor,
                                 const CrossingEvent& hit, double eps, double phi) {
  const std::size_t d = potential.dim();
  const Vector& v = anchor.p;
  PhasePoint start{Vector(d), Vector(d)};
  for (std::size_t k = 0; k < d; ++k) start.q[k] = hit.point[k] - phi * eps * v[k];
  const Vector grad = potential.gradient(start.q);
  for (std::size_t k = 0; k < d; ++k) start.p[k] = v[k] + 0.5 * eps * grad[k];
  return start;
}

}  // namespace

LocalErrorStudy local_error_order(const Potential& potential, const PhasePoint& anchor,
                                  ConstSpan epsilons, const LocalErrorOptions& options) {
  require(!epsilons.empty(), "local_error_order: empty step-size list");
  LocalErrorStudy study;
  study.epsilons.assign(epsilons.begin(), epsilons.end());

  CrossingEvent hit;
  if (options.regime == LocalRegime::Crossing) {
    const double phi = options.crossing_fraction;
    require(phi > 0.0 && phi < 1.0, "crossing_fraction must lie in (0, 1)");
    if (potential.surface_count() == 0)
      throw ConstructionError("crossing regime needs a potential with surfaces");
    const auto hits = detect_crossings(potential, anchor.q, anchor.p, options.probe_time);
    if (hits.empty()) throw ConstructionError("anchor ray never crosses a surface");
    hit = hits.front();
    study.surface = hit.surface;
  }

  for (double eps : study.epsilons) {
    PhasePoint start = options.regime == LocalRegime::Crossing
                           ? forced_crossing_start(potential, anchor, hit, eps,
                                                   options.crossing_fraction)
                           : anchor;
    auto [next, record] = leapfrog_step(potential, start, eps);
    double fraction = std::nan("");
    if (options.regime == LocalRegime::Crossing) {
      auto it = std::find_if(record.crossings.begin(), record.crossings.end(),
                             [&](const CrossingEvent& e) { return e.surface == hit.surface; });
      if (it == record.crossings.end())
        throw ConstructionError("constructed start does not cross the target surface");
      fraction = it->time / eps;
    }
    study.measured.push_back(record.delta_h);
    study.predicted.push_back(predict_local_error(record));
    study.crossing_fraction.push_back(fraction);
    study.starts.push_back(std::move(start));
    study.records.push_back(std::move(record));
  }

  Vector abs_measured, abs_residual;
  for (std::size_t i = 0; i < study.measured.size(); ++i) {
    abs_measured.push_back(std::abs(study.measured[i]));
    abs_residual.push_back(std::abs(study.measured[i] - study.predicted[i]));
  }
  study.measured_fit = fit_error_order(study.epsilons, abs_measured);
  if (options.regime == LocalRegime::Crossing) {
    const std::size_t usable = static_cast<std::size_t>(std::count_if(
        abs_residual.begin(), abs_residual.end(), [](double r) { return r > kErrorNoiseFloor; }));
    if (usable >= 2) {
      study.residual_fit = fit_error_order(study.epsilons, abs_residual);
    } else {
      // Prediction exact to working precision at (almost) every eps.
      study.residual_fit.epsilons = study.epsilons;
      study.residual_fit.abs_errors = abs_residual;
      study.residual_fit.used.assign(abs_residual.size(), false);
      study.residual_fit.slope = std::numeric_limits<double>::infinity();
      study.residual_fit.r_squared = std::nan("");
    }
  }
  return study;
}

GlobalErrorStudy global_error_order(const Potential& potential, const std::vector<PhasePoint>& starts,
                                    double travel_time, ConstSpan epsilons, bool count_crossings) {
  require(!starts.empty(), "global_error_order: need at least one start");
  require(travel_time > 0.0, "global_error_order: travel time must be positive");
  GlobalErrorStudy study;
  study.travel_time = travel_time;
  study.epsilons.assign(epsilons.begin(), epsilons.end());
  IntegratorOptions opts;
  opts.detect_crossings = count_crossings && potential.surface_count() > 0;
  for (double eps : study.epsilons) {
    const auto steps = static_cast<std::size_t>(std::max(1.0, std::round(travel_time / eps)));
    double sum_abs = 0.0, sum_cross = 0.0;
    std::size_t ok = 0;
    bool any_divergent = false;
    for (const PhasePoint& s : starts) {
      if (opts.detect_crossings) {
        const TrajectoryTrace trace = trajectory(potential, s, eps, steps, opts);
        if (trace.divergent) {
          any_divergent = true;
          continue;
        }
        std::size_t crossings = 0;
        for (const auto& r : trace.records) crossings += r.crossings.size();
        sum_abs += std::abs(trace.total_delta_h);
        sum_cross += static_cast<double>(crossings);
      } else {
        const Integration run = integrate(potential, s, eps, steps);
        if (run.divergent) {
          any_divergent = true;
          continue;
        }
        sum_abs += std::abs(run.delta_h);
      }
      ++ok;
    }
    study.steps.push_back(steps);
    study.divergent.push_back(any_divergent);
    study.mean_abs_delta_h.push_back(ok ? sum_abs / static_cast<double>(ok) : std::nan(""));
    study.mean_crossings.push_back(ok ? sum_cross / static_cast<double>(ok) : std::nan(""));
  }
  study.fit = fit_error_order(study.epsilons, study.mean_abs_delta_h);
  return study;
}

CrossingTimeStats crossing_time_stats(const Potential& potential, const StateSampler& sampler,
                                      double step_size, std::size_t n_samples, ConstSpan a_grid,
                                      std::uint64_t seed, std::size_t workers) {
  require(step_size > 0.0, "crossing_time_stats: step size must be positive");
  for (double a : a_grid) require(a >= 0.0 && a <= 1.0, "window half-widths must lie in [0, 1]");
  constexpr std::size_t kChunk = 1024;
  const std::size_t n_chunks = (n_samples + kChunk - 1) / kChunk;

  struct ChunkResult {
    std::size_t single = 0;
    std::size_t multiple = 0;
    Vector times;
  };
  std::vector<ChunkResult> chunks(n_chunks);
  IntegratorOptions opts;
  parallel_for(n_chunks, workers, [&](std::size_t c) {
    std::mt19937_64 rng(derive_seed(seed, c));
    const std::size_t begin = c * kChunk;
    const std::size_t end = std::min(n_samples, begin + kChunk);
    ChunkResult& out = chunks[c];
    for (std::size_t i = begin; i < end; ++i) {
      const PhasePoint state = sampler(rng);
      auto [next, record] = leapfrog_step(potential, state, step_size, opts);
      if (record.divergent) continue;
      if (record.crossings.size() == 1) {
        ++out.single;
        out.times.push_back(record.crossings.front().time / step_size);
      } else if (record.crossings.size() > 1) {
        ++out.multiple;
      }
    }
  });

  CrossingTimeStats stats;
  stats.step_size = step_size;
  stats.a_grid.assign(a_grid.begin(), a_grid.end());
  stats.n_samples = n_samples;
  for (const auto& c : chunks) {
    stats.n_single += c.single;
    stats.n_multiple += c.multiple;
    stats.single_times.insert(stats.single_times.end(), c.times.begin(), c.times.end());
  }
  for (double a : stats.a_grid) {
    const double lo = 0.5 * (1.0 - a), hi = 0.5 * (1.0 + a);
    std::size_t inside = 0;
    for (double t : stats.single_times)
      if (t > lo && t < hi) ++inside;
    stats.fractions.push_back(stats.n_single ? static_cast<double>(inside) /
                                                   static_cast<double>(stats.n_single)
                                             : 0.0);
  }
  return stats;
}

void write_fit_csv(std::ostream& out, const ErrorOrderFit& fit) {
  CsvWriter w(out);
  w.header({"epsilon", "abs_error", "used", "slope", "intercept", "r_squared"});
  for (std::size_t i = 0; i < fit.epsilons.size(); ++i) {
    w.cell(fit.epsilons[i])
        .cell(fit.abs_errors[i])
        .cell(static_cast<bool>(fit.used[i]))
        .cell(fit.slope)
        .cell(fit.intercept)
        .cell(fit.r_squared);
    w.end_row();
  }
}

void write_crossing_stats_csv(std::ostream& out, const CrossingTimeStats& stats) {
  CsvWriter w(out);
  w.header({"a", "fraction", "n_single", "n_multiple", "n_samples", "epsilon"});
  for (std::size_t i = 0; i < stats.a_grid.size(); ++i) {
    w.cell(stats.a_grid[i])
        .cell(stats.fractions[i])
        .cell(static_cast<unsigned long long>(stats.n_single))
        .cell(static_cast<unsigned long long>(stats.n_multiple))
        .cell(static_cast<unsigned long long>(stats.n_samples))
        .cell(stats.step_size);
    w.end_row();
  }
}

}  // namespace ndhmc
