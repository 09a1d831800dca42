#include "ndhmc/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

#include "ndhmc/csv.hpp"
#include "ndhmc/hmc.hpp"
#include "ndhmc/parallel.hpp"
#include "ndhmc/stats.hpp"
#include "ndhmc/symplectic.hpp"

namespace ndhmc {

double acceptance_limit(int order, double l, double sigma) {
  if (order != 1 && order != 2) throw UnsupportedError("integrator order must be 1 or 2");
  require(l >= 0.0 && sigma > 0.0, "acceptance_limit: need l >= 0 and sigma > 0");
  return 2.0 * standard_normal_cdf(-std::pow(l, order) * std::sqrt(sigma) / 2.0);
}

EfficiencyCurve efficiency_curve(int order, double sigma, std::size_t grid_points, double l_min,
                                 double l_max) {
  require(grid_points >= 3 && l_min > 0.0 && l_max > l_min, "efficiency_curve: bad grid");
  EfficiencyCurve c;
  c.order = order;
  c.sigma = sigma;
  const double lo = std::log(l_min), hi = std::log(l_max);
  std::size_t best = 0;
  for (std::size_t i = 0; i < grid_points; ++i) {
    const double l = std::exp(lo + (hi - lo) * static_cast<double>(i) / (grid_points - 1));
    const double a = acceptance_limit(order, l, sigma);
    c.l.push_back(l);
    c.acceptance.push_back(a);
    c.efficiency.push_back(l * a);
    if (c.efficiency.back() > c.efficiency[best]) best = i;
  }

  // d/dl [l a(l)] = 2 Phi(-x) - 2 order x phi(x) with x = l^order sqrt(sigma) / 2;
  // its sign change brackets l_opt between the grid neighbours.
  const double half_root_sigma = 0.5 * std::sqrt(sigma);
  auto slope = [&](double l) {
    const double x = std::pow(l, order) * half_root_sigma;
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return 2.0 * standard_normal_cdf(-x) - 2.0 * order * x * pdf;
  };
  double a = c.l[best == 0 ? 0 : best - 1];
  double b = c.l[std::min(best + 1, grid_points - 1)];
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    if (slope(mid) > 0.0) {
      a = mid;
    } else {
      b = mid;
    }
  }
  c.l_opt = 0.5 * (a + b);
  c.a_opt = acceptance_limit(order, c.l_opt, sigma);
  c.efficiency_opt = c.l_opt * c.a_opt;
  return c;
}

EfficiencyBand efficiency_band(const EfficiencyCurve& curve, double fraction) {
  require(fraction > 0.0 && fraction < 1.0, "efficiency_band: fraction must lie in (0, 1)");
  const double target = fraction * curve.efficiency_opt;
  auto excess = [&](double l) {
    return l * acceptance_limit(curve.order, l, curve.sigma) - target;
  };
  // Efficiency is unimodal: increasing below l_opt, decreasing above.
  auto solve = [&](double lo, double hi) {
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if ((excess(mid) > 0.0) == (excess(hi) > 0.0)) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    return 0.5 * (lo + hi);
  };
  EfficiencyBand band;
  band.fraction = fraction;
  band.l_low = solve(curve.l.front(), curve.l_opt);
  band.l_high = solve(curve.l.back(), curve.l_opt);
  band.acceptance_high = acceptance_limit(curve.order, band.l_low, curve.sigma);
  band.acceptance_low = acceptance_limit(curve.order, band.l_high, curve.sigma);
  return band;
}

SigmaEstimate estimate_sigma(const Target1D& target, double step_size, std::size_t n,
                             double travel_time, std::uint64_t seed, std::size_t workers) {
  require(step_size > 0.0 && travel_time > 0.0 && n >= 1, "estimate_sigma: bad arguments");
  const auto steps =
      static_cast<std::size_t>(std::max(1.0, std::round(travel_time / step_size)));
  constexpr std::size_t kChunk = 4096;
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  std::vector<double> sums(n_chunks, 0.0), sq_sums(n_chunks, 0.0);
  const double half = 0.5 * step_size;

  parallel_for(n_chunks, workers, [&](std::size_t c) {
    std::mt19937_64 rng(derive_seed(seed, c));
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = c * kChunk; i < end; ++i) {
      double q = target.sample(rng);
      double p = normal(rng);
      const double h0 = target.value(q) + 0.5 * p * p;
      double g = target.derivative(q);
      for (std::size_t k = 0; k < steps; ++k) {
        const double p_half = p - half * g;
        q += step_size * p_half;
        g = target.derivative(q);
        p = p_half - half * g;
      }
      const double delta = target.value(q) + 0.5 * p * p - h0;
      s += delta;
      s2 += delta * delta;
    }
    sums[c] = s;
    sq_sums[c] = s2;
  });

  SigmaEstimate est;
  est.step_size = step_size;
  est.travel_time = travel_time;
  est.steps = steps;
  est.n = n;
  double s = 0.0, s2 = 0.0;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    s += sums[c];
    s2 += sq_sums[c];
  }
  est.mean_delta = s / static_cast<double>(n);
  est.mean_sq_delta = s2 / static_cast<double>(n);
  const double e2 = step_size * step_size;
  est.sigma = est.mean_sq_delta / e2;
  est.mu = est.mean_delta / e2;
  est.sigma_order2 = est.mean_sq_delta / (e2 * e2);
  return est;
}

std::vector<ScalingRow> scaling_experiment(const PiecewiseAffine1D& component, double l,
                                           const std::vector<std::size_t>& dims,
                                           std::size_t samples_per_dim, std::uint64_t seed,
                                           double travel_time, double exponent,
                                           std::size_t workers) {
  require(l > 0.0 && samples_per_dim >= 2 && travel_time > 0.0, "scaling_experiment: bad arguments");
  constexpr std::size_t kChunk = 64;
  std::vector<ScalingRow> rows;
  for (std::size_t di = 0; di < dims.size(); ++di) {
    const std::size_t d = dims[di];
    const ProductPotential target(component, d);
    ScalingRow row;
    row.dim = d;
    row.step_size = l * std::pow(static_cast<double>(d), -exponent);
    row.steps = static_cast<std::size_t>(std::max(1.0, std::round(travel_time / row.step_size)));
    const std::size_t n_chunks = (samples_per_dim + kChunk - 1) / kChunk;
    Vector accept(samples_per_dim, 0.0);
    std::vector<std::size_t> divergent(n_chunks, 0);
    parallel_for(n_chunks, workers, [&](std::size_t c) {
      std::mt19937_64 rng(derive_seed(seed, (static_cast<std::uint64_t>(di) << 32) | c));
      std::normal_distribution<double> normal(0.0, 1.0);
      const std::size_t end = std::min(samples_per_dim, (c + 1) * kChunk);
      PhasePoint state{Vector(d), Vector(d)};
      for (std::size_t i = c * kChunk; i < end; ++i) {
        for (double& v : state.q) v = component.sample(rng);
        for (double& v : state.p) v = normal(rng);
        const Integration run = integrate(target, state, row.step_size, row.steps);
        if (run.divergent) ++divergent[c];
        accept[i] = run.divergent ? 0.0 : accept_probability(run.delta_h);
      }
    });
    row.acceptance = mean(accept);
    row.acceptance_se = standard_error(accept);
    for (auto n : divergent) row.n_divergent += n;
    rows.push_back(row);
  }
  return rows;
}

void write_efficiency_csv(std::ostream& out, const EfficiencyCurve& curve) {
  CsvWriter w(out);
  w.header({"order", "sigma", "l", "acceptance", "efficiency", "l_opt", "a_opt"});
  for (std::size_t i = 0; i < curve.l.size(); ++i) {
    w.cell(curve.order)
        .cell(curve.sigma)
        .cell(curve.l[i])
        .cell(curve.acceptance[i])
        .cell(curve.efficiency[i])
        .cell(curve.l_opt)
        .cell(curve.a_opt);
    w.end_row();
  }
}

void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows) {
  CsvWriter w(out);
  w.header({"d", "epsilon", "L", "acceptance", "acceptance_se", "n_divergent"});
  for (const auto& r : rows) {
    w.cell(static_cast<unsigned long long>(r.dim))
        .cell(r.step_size)
        .cell(static_cast<unsigned long long>(r.steps))
        .cell(r.acceptance)
        .cell(r.acceptance_se)
        .cell(static_cast<unsigned long long>(r.n_divergent));
    w.end_row();
  }
}

}  // namespace ndhmc
