#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "ndhmc/nondiff.hpp"
#include "ndhmc/proxy.hpp"
#include "ndhmc/stats.hpp"

using namespace ndhmc;

namespace {

ProductPotential abs_potential(std::size_t d = 1) {
  return ProductPotential(PiecewiseAffine1D::laplace(), d);
}

// Three pieces with |V'| = 1 everywhere (not normalizable; single steps only).
PiecewiseAffine1D three_piece() { return PiecewiseAffine1D({-1.0, 1.0}, {-1.0, 1.0, -1.0}); }

// V = ||x| - 1|.
PiecewiseAffine1D w_shape() {
  return PiecewiseAffine1D({-1.0, 0.0, 1.0}, {-1.0, 1.0, -1.0, 1.0}, 1.0);
}

// Slopes of different magnitude.
PiecewiseAffine1D uneven() { return PiecewiseAffine1D({-1.0, 1.0}, {-1.0, 0.5, 3.0}, 0.5); }

}  // namespace

TEST(Predict, NoCrossingsIsZero) {
  auto [next, rec] = leapfrog_step(abs_potential(), {{2.0}, {0.1}}, 0.1);
  EXPECT_TRUE(rec.crossings.empty());
  EXPECT_EQ(predict_local_error(rec), 0.0);
}

TEST(Predict, AbsoluteValueExampleIsExact) {
  auto [next, rec] = leapfrog_step(abs_potential(), {{-0.3}, {1.0}}, 1.0);
  EXPECT_NEAR(predict_local_error(rec), 0.9, 1e-15);
  EXPECT_NEAR(predict_local_error(rec), rec.delta_h, 1e-15);
}

TEST(Predict, MidpointCrossingCancels) {
  auto [next, rec] = leapfrog_step(abs_potential(), {{-0.75}, {1.0}}, 1.0);
  ASSERT_EQ(rec.crossings.size(), 1u);
  EXPECT_DOUBLE_EQ(rec.crossings[0].time, 0.5);
  EXPECT_EQ(predict_local_error(rec), 0.0);
  EXPECT_NEAR(rec.delta_h, 0.0, 1e-15);
}

TEST(Predict, ExactOnPiecewiseAffineTargets) {
  for (const ProductPotential& pot :
       {abs_potential(1), abs_potential(3), ProductPotential(three_piece(), 1),
        ProductPotential(three_piece(), 2), ProductPotential(w_shape(), 2)}) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> uq(-2.0, 2.0), ue(0.01, 1.5);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::size_t crossed = 0;
    for (int i = 0; i < 1000; ++i) {
      PhasePoint s{Vector(pot.dim()), Vector(pot.dim())};
      for (double& v : s.q) v = uq(rng);
      for (double& v : s.p) v = normal(rng);
      auto [next, rec] = leapfrog_step(pot, s, ue(rng));
      if (!rec.crossings.empty()) ++crossed;
      EXPECT_NEAR(rec.delta_h, predict_local_error(rec), 1e-12);
    }
    EXPECT_GT(crossed, 100u);
  }
}

// With V' = g0 at q0 and g1 at q1 the step energy error is exactly
// prediction + eps^2 / 8 * (|g1|^2 - |g0|^2); the extra term vanishes when
// every piece has the same |slope|.
TEST(Predict, UnevenSlopesLeaveEndpointTerm) {
  const ProductPotential pot(uneven(), 1);
  std::mt19937_64 rng(18);
  std::uniform_real_distribution<double> uq(-2.0, 2.0), ue(0.01, 1.5);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t nonzero = 0;
  for (int i = 0; i < 1000; ++i) {
    const double eps = ue(rng);
    const PhasePoint s{{uq(rng)}, {normal(rng)}};
    auto [next, rec] = leapfrog_step(pot, s, eps);
    const double g0 = pot.gradient(rec.q0)[0], g1 = pot.gradient(rec.q1)[0];
    const double endpoint = eps * eps / 8.0 * (g1 * g1 - g0 * g0);
    if (std::abs(endpoint) > 1e-6) ++nonzero;
    EXPECT_NEAR(rec.delta_h, predict_local_error(rec) + endpoint, 1e-12);
  }
  EXPECT_GT(nonzero, 100u);
}

TEST(FitErrorOrder, RecoversPowerLaw) {
  const Vector eps = dyadic_step_sizes(1e-3, 0, 6);
  Vector err;
  for (double e : eps) err.push_back(0.7 * e * e * e);
  const ErrorOrderFit fit = fit_error_order(eps, err);
  EXPECT_NEAR(fit.slope, 3.0, 1e-10);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
}

TEST(FitErrorOrder, DropsNoiseFloor) {
  const Vector eps{1e-3, 2e-3, 4e-3, 8e-3};
  const Vector err{1e-16, 2e-3, 4e-3, 8e-3};
  const ErrorOrderFit fit = fit_error_order(eps, err);
  EXPECT_FALSE(fit.used[0]);
  EXPECT_NEAR(fit.slope, 1.0, 1e-12);
  EXPECT_THROW(fit_error_order(Vector{1.0, 2.0}, Vector{0.0, 1.0}), ContractError);
}

TEST(DyadicStepSizes, Values) {
  const Vector eps = dyadic_step_sizes();
  ASSERT_EQ(eps.size(), 8u);
  EXPECT_EQ(eps.front(), 1e-4);
  EXPECT_EQ(eps.back(), 1e-4 * 128);
}

TEST(LocalOrder, AbsoluteValueForcedCrossing) {
  LocalErrorOptions opts;
  opts.regime = LocalRegime::Crossing;
  const LocalErrorStudy study =
      local_error_order(abs_potential(), {{-0.5}, {1.0}}, dyadic_step_sizes(1e-3, 0, 8), opts);
  EXPECT_NEAR(study.measured_fit.slope, 1.0, 1e-6);
  for (std::size_t i = 0; i < study.measured.size(); ++i) {
    EXPECT_NEAR(study.measured[i], study.predicted[i], 1e-12);
    EXPECT_NEAR(study.crossing_fraction[i], 0.25, 1e-9);
  }
  EXPECT_TRUE(std::isinf(study.residual_fit.slope));
}

TEST(LocalOrder, HarmonicIsThirdOrder) {
  const LocalErrorStudy study =
      local_error_order(QuadraticPotential(1), {{0.8}, {0.6}}, dyadic_step_sizes(1e-3, 0, 8));
  EXPECT_NEAR(study.measured_fit.slope, 3.0, 0.05);
}

TEST(LocalOrder, CrossingRegimeNeedsSurfaces) {
  LocalErrorOptions opts;
  opts.regime = LocalRegime::Crossing;
  EXPECT_THROW(local_error_order(QuadraticPotential(1), {{0.8}, {0.6}}, Vector{1e-3, 2e-3}, opts),
               ConstructionError);
  EXPECT_THROW(local_error_order(abs_potential(), {{1.0}, {1.0}}, Vector{1e-3, 2e-3}, opts),
               ConstructionError);
}

TEST(GlobalOrder, HarmonicIsSecondOrder) {
  const GlobalErrorStudy study = global_error_order(
      QuadraticPotential(1), {PhasePoint{{0.8}, {0.6}}}, 1.0, Vector{0.01, 0.02, 0.04, 0.08});
  EXPECT_GE(study.fit.slope, 1.6);
  EXPECT_LE(study.fit.slope, 2.4);
  EXPECT_EQ(study.steps.front(), 100u);
}

TEST(CrossingStats, WindowEdgeCases) {
  const auto pot = abs_potential();
  const StateSampler sampler = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uq(-0.2, 0.2);
    return PhasePoint{{uq(rng)}, {1.0}};
  };
  const CrossingTimeStats stats = crossing_time_stats(pot, sampler, 0.1, 5000, Vector{0.0, 1.0}, 3);
  EXPECT_EQ(stats.fractions[0], 0.0);
  EXPECT_EQ(stats.fractions[1], 1.0);
  EXPECT_EQ(stats.n_multiple, 0u);
  EXPECT_GT(stats.n_single, 0u);
}

TEST(CrossingStats, UniformCrossingTimesAreLinearInWindow) {
  const auto pot = abs_potential();
  const StateSampler sampler = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uq(-0.5, 0.5);
    return PhasePoint{{uq(rng)}, {1.0}};
  };
  const Vector a{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  const CrossingTimeStats stats = crossing_time_stats(pot, sampler, 0.1, 200000, a, 4, 4);
  const LinearFit fit = least_squares(a, stats.fractions);
  EXPECT_GT(fit.r_squared, 0.99);
  EXPECT_NEAR(fit.slope, 1.0, 0.05);
}

TEST(CrossingStats, IndependentOfWorkerCount) {
  const auto pot = abs_potential(2);
  const StateSampler sampler = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uq(-1.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    return PhasePoint{{uq(rng), uq(rng)}, {normal(rng), normal(rng)}};
  };
  const Vector a{0.25, 0.5};
  const auto one = crossing_time_stats(pot, sampler, 0.2, 5000, a, 9, 1);
  const auto four = crossing_time_stats(pot, sampler, 0.2, 5000, a, 9, 4);
  EXPECT_EQ(one.single_times, four.single_times);
  EXPECT_EQ(one.fractions, four.fractions);
}
