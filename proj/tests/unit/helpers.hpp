#pragma once

#include <cmath>
#include <random>

#include "ndhmc/bnn.hpp"
#include "ndhmc/harness.hpp"

namespace ndhmc::testing {

inline PosteriorSpec small_spec(Activation act, std::vector<std::size_t> hidden, std::size_t n,
                                std::uint64_t seed) {
  PosteriorSpec spec;
  spec.arch = make_mlp(1, hidden, 1, act);
  spec.data = generate_synthetic(n, seed);
  return spec;
}

inline Vector normal_vector(std::size_t d, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(d);
  for (double& x : v) x = normal(rng);
  return v;
}

/// Rejection-samples q until every pre-activation has |value| > margin.
inline Vector margin_point(const PosteriorSpec& spec, double margin, std::mt19937_64& rng) {
  for (;;) {
    Vector q = normal_vector(spec.arch.param_dim(), 1.0, rng);
    bool ok = true;
    for (double z : all_preactivations(spec, q))
      if (std::abs(z) <= margin) ok = false;
    if (ok) return q;
  }
}

inline double max_relative_error(const Vector& a, const Vector& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  return worst;
}

}  // namespace ndhmc::testing
