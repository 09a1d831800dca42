#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "ndhmc/parallel.hpp"
#include "ndhmc/stats.hpp"
#include "ndhmc/types.hpp"

using namespace ndhmc;

TEST(Stats, MeanVarianceStandardError) {
  const Vector x{1.0, 2.0, 3.0, 4.0};
  EXPECT_EQ(mean(x), 2.5);
  EXPECT_NEAR(variance(x), 5.0 / 3.0, 1e-15);
  EXPECT_NEAR(standard_error(x), std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
}

TEST(Stats, LeastSquaresExactLine) {
  const LinearFit fit = least_squares(Vector{0.0, 1.0, 2.0, 3.0}, Vector{1.0, 3.0, 5.0, 7.0});
  EXPECT_NEAR(fit.slope, 2.0, 1e-14);
  EXPECT_NEAR(fit.intercept, 1.0, 1e-14);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-14);
  EXPECT_THROW(least_squares(Vector{1.0, 1.0}, Vector{0.0, 1.0}), ContractError);
}

TEST(Stats, Spearman) {
  EXPECT_NEAR(spearman(Vector{1, 2, 3, 4}, Vector{10, 20, 25, 100}), 1.0, 1e-15);
  EXPECT_NEAR(spearman(Vector{1, 2, 3, 4}, Vector{4, 3, 2, 1}), -1.0, 1e-15);
  // scipy.stats.spearmanr([1,2,3,4,5], [2,1,4,3,5]) = 0.8
  EXPECT_NEAR(spearman(Vector{1, 2, 3, 4, 5}, Vector{2, 1, 4, 3, 5}), 0.8, 1e-12);
}

TEST(Stats, KolmogorovSmirnovOfGrid) {
  // Points i/n against the uniform CDF: D = 1/n.
  Vector xs;
  for (int i = 1; i <= 10; ++i) xs.push_back(i / 10.0);
  EXPECT_NEAR(ks_statistic(xs, [](double x) { return x; }), 0.1, 1e-15);
  EXPECT_NEAR(standard_normal_cdf(0.0), 0.5, 1e-16);
  EXPECT_NEAR(standard_normal_cdf(-1.0), 0.15865525393145707, 1e-15);
}

TEST(Parallel, RunsEveryTaskOnce) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 7, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(Parallel, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(50, 4,
                            [](std::size_t i) {
                              if (i == 17) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

TEST(Parallel, DerivedSeedsDiffer) {
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  EXPECT_EQ(derive_seed(5, 9), derive_seed(5, 9));
}
