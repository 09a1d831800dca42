#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "ndhmc/bnn.hpp"
#include "ndhmc/potential.hpp"

using namespace ndhmc;
using ndhmc::testing::margin_point;
using ndhmc::testing::max_relative_error;
using ndhmc::testing::small_spec;

namespace {

PosteriorSpec one_point_spec(Activation act, std::size_t hidden, double x, double y) {
  PosteriorSpec spec;
  spec.arch = make_mlp(1, {hidden}, 1, act);
  spec.data.inputs = {x};
  spec.data.targets = {y};
  return spec;
}

Vector central_difference(const PosteriorSpec& spec, const Vector& q) {
  Vector g(q.size());
  Vector qq = q;
  for (std::size_t k = 0; k < q.size(); ++k) {
    const double h = 1e-6 * (1.0 + std::abs(q[k]));
    qq[k] = q[k] + h;
    const double up = potential(spec, qq);
    qq[k] = q[k] - h;
    const double down = potential(spec, qq);
    qq[k] = q[k];
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST(Architecture, ParamDimCountsWeightsAndBiases) {
  EXPECT_EQ(make_mlp(1, {50}, 1, Activation::Relu).param_dim(), 151u);
  EXPECT_EQ(make_mlp(1, {20, 20}, 1, Activation::Relu).param_dim(), 481u);
  EXPECT_EQ(make_mlp(1, {20, 20}, 1, Activation::Relu).hidden_units(), 40u);
}

TEST(Architecture, OffsetsAreLayerMajor) {
  const auto arch = make_mlp(2, {3}, 1, Activation::Sigmoid);
  EXPECT_EQ(arch.weight_offset(1), 0u);
  EXPECT_EQ(arch.bias_offset(1), 6u);
  EXPECT_EQ(arch.weight_offset(2), 9u);
  EXPECT_EQ(arch.bias_offset(2), 12u);
}

TEST(Architecture, RejectsArbitraryZeroSubderivative) {
  auto arch = make_mlp(1, {2}, 1, Activation::Relu);
  arch.zero_subderivative = 0.5;
  EXPECT_THROW(arch.validate(), ContractError);
  arch.zero_subderivative = 1.0;
  EXPECT_NO_THROW(arch.validate());
  auto leaky = make_mlp(1, {2}, 1, Activation::LeakyRelu);
  leaky.zero_subderivative = leaky.leaky_slope;
  EXPECT_NO_THROW(leaky.validate());
}

TEST(Flatten, RoundTrips) {
  const auto arch = make_mlp(1, {3, 2}, 1, Activation::Tanh);
  std::mt19937_64 rng(3);
  const Vector q = ndhmc::testing::normal_vector(arch.param_dim(), 1.0, rng);
  EXPECT_EQ(flatten(arch, unflatten(arch, q)), q);
}

TEST(Forward, ZeroParametersGiveZeroOutput) {
  const auto arch = make_mlp(1, {1}, 1, Activation::Relu);
  const Vector q(arch.param_dim(), 0.0);
  for (double x : {-3.0, 0.0, 2.5}) EXPECT_EQ(forward(arch, q, Vector{x})[0], 0.0);
}

TEST(Forward, ReluIdentityNet) {
  const auto arch = make_mlp(1, {1}, 1, Activation::Relu);
  const Vector q{1.0, 0.0, 1.0, 0.0};
  EXPECT_EQ(forward(arch, q, Vector{-2.0})[0], 0.0);
  EXPECT_EQ(forward(arch, q, Vector{3.0})[0], 3.0);
}

TEST(Forward, SigmoidNetMatchesScript) {
  // numpy: A2 @ sigmoid(A1 * 0.8 + b1) + b2
  const auto arch = make_mlp(1, {2}, 1, Activation::Sigmoid);
  const Vector q{0.5, -1.2, 0.1, 0.3, 0.7, -0.4, 0.05};
  EXPECT_NEAR(forward(arch, q, Vector{0.8})[0], 0.34942568722185235, 1e-12);
}

TEST(Potential, PriorOnly) {
  PosteriorSpec spec;
  spec.arch = make_mlp(1, {1}, 1, Activation::Relu);
  EXPECT_EQ(potential(spec, Vector(4, 0.0)), 0.0);
  EXPECT_DOUBLE_EQ(potential(spec, Vector{1.0, 1.0, 0.0, 0.0}), 1.0);
}

TEST(Potential, ResidualTermWithZeroOutput) {
  auto spec = one_point_spec(Activation::Relu, 1, 0.7, 0.5);
  const Vector q{0.3, 0.2, 0.0, 0.0};
  EXPECT_NEAR(potential(spec, q), 0.065 + 12.5, 1e-12);
}

TEST(Potential, SigmoidMatchesScript) {
  PosteriorSpec spec;
  spec.arch = make_mlp(1, {2}, 1, Activation::Sigmoid);
  spec.data.inputs = {0.8, 2.0};
  spec.data.targets = {0.3, -0.5};
  const Vector q{0.5, -1.2, 0.1, 0.3, 0.7, -0.4, 0.05};
  EXPECT_NEAR(potential(spec, q), 54.547478603773435, 1e-10);
}

TEST(Gradient, PriorOnlyEqualsQ) {
  PosteriorSpec spec;
  spec.arch = make_mlp(1, {3}, 1, Activation::Sigmoid);
  const Vector q{0.1, -2.0, 3.0, 0.5, 0.25, -1.0, 7.0, 0.0, 1.5, -0.3};
  EXPECT_EQ(grad_potential(spec, q), q);
}

TEST(Gradient, PotentialAndGradientAgree) {
  const auto spec = small_spec(Activation::Sigmoid, {4}, 10, 1);
  std::mt19937_64 rng(2);
  const Vector q = ndhmc::testing::normal_vector(spec.arch.param_dim(), 1.0, rng);
  Vector g(q.size());
  EXPECT_DOUBLE_EQ(potential_and_gradient(spec, q, g), potential(spec, q));
  EXPECT_EQ(g, grad_potential(spec, q));
}

class GradientFiniteDifference : public ::testing::TestWithParam<Activation> {};

TEST_P(GradientFiniteDifference, MatchesAtMarginPoints) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto spec = small_spec(GetParam(), trial % 2 ? std::vector<std::size_t>{5, 4}
                                                       : std::vector<std::size_t>{8},
                                 12, 100 + trial);
    const Vector q = margin_point(spec, 1e-2, rng);
    EXPECT_LT(max_relative_error(grad_potential(spec, q), central_difference(spec, q)), 1e-5)
        << "trial " << trial;
  }
}

INSTANTIATE_TEST_SUITE_P(AllActivations, GradientFiniteDifference,
                         ::testing::Values(Activation::Sigmoid, Activation::Relu,
                                           Activation::LeakyRelu, Activation::Tanh),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Preactivations, AffineRoot) {
  const auto arch = make_mlp(1, {1}, 1, Activation::Relu);
  EXPECT_EQ(preactivations(arch, Vector{2.0, -1.0, 1.0, 0.0}, Vector{0.5})[0], 0.0);
}

TEST(Preactivations, ZeroParamsGiveZeros) {
  const auto arch = make_mlp(1, {3, 2}, 1, Activation::Relu);
  for (double z : preactivations(arch, Vector(arch.param_dim(), 0.0), Vector{1.7})) EXPECT_EQ(z, 0.0);
}

TEST(Preactivations, PatternMatchesSigns) {
  const auto spec = small_spec(Activation::Relu, {4, 3}, 15, 4);
  std::mt19937_64 rng(5);
  const Vector q = ndhmc::testing::normal_vector(spec.arch.param_dim(), 1.0, rng);
  const Vector z = all_preactivations(spec, q);
  const ActivationPattern pattern = activation_pattern(spec, q);
  const std::size_t H = spec.arch.hidden_units();
  for (std::size_t i = 0; i < spec.data.size(); ++i) {
    const Vector direct = preactivations(spec.arch, q, spec.data.input(i));
    for (std::size_t k = 0; k < H; ++k) {
      EXPECT_EQ(direct[k], z[i * H + k]);
      EXPECT_EQ(pattern.at(i, k), sign_of(direct[k]));
    }
  }
}

TEST(ForcedGradient, ActualPatternReproducesGradient) {
  for (Activation act : {Activation::Relu, Activation::LeakyRelu}) {
    const auto spec = small_spec(act, {5, 3}, 10, 6);
    std::mt19937_64 rng(7);
    const Vector q = ndhmc::testing::normal_vector(spec.arch.param_dim(), 1.0, rng);
    EXPECT_EQ(grad_potential_forced(spec, q, activation_pattern(spec, q)), grad_potential(spec, q));
  }
}

TEST(ForcedGradient, SmoothActivationsUnsupported) {
  const auto spec = small_spec(Activation::Sigmoid, {2}, 3, 1);
  const Vector q(spec.arch.param_dim(), 0.1);
  EXPECT_THROW(grad_potential_forced(spec, q, ActivationPattern(3, 2)), UnsupportedError);
}

TEST(ForcedGradient, FlipJumpIsParallelToPreactivationGradient) {
  // z on the surface 2x - 1 = 0 at x = 0.5; f = b2 there, residual r = -0.2.
  // Jump = r * A2 / noise^2 * d(pre)/dq = -16 * (x, 1, 0, 0).
  const auto spec = one_point_spec(Activation::Relu, 1, 0.5, 0.3);
  const Vector q{2.0, -1.0, 0.8, 0.1};
  const Vector jump = grad_jump(spec, q, 0, 0);
  EXPECT_NEAR(jump[0], -8.0, 1e-12);
  EXPECT_NEAR(jump[1], -16.0, 1e-12);
  EXPECT_EQ(jump[2], 0.0);
  EXPECT_EQ(jump[3], 0.0);
}

TEST(ForcedGradient, AllOffPatternKeepsBiasPath) {
  // Neuron is on at q but forced off: output is b2 = 0.2, residual -0.3.
  const auto spec = one_point_spec(Activation::Relu, 1, 1.0, 0.5);
  const Vector q{0.4, 0.3, 0.6, 0.2};
  ActivationPattern off(1, 1);
  off.set(0, 0, -1);
  const Vector g = grad_potential_forced(spec, q, off);
  EXPECT_DOUBLE_EQ(g[0], 0.4);
  EXPECT_DOUBLE_EQ(g[1], 0.3);
  EXPECT_DOUBLE_EQ(g[2], 0.6);
  EXPECT_NEAR(g[3], 0.2 - 30.0, 1e-12);
}

TEST(ForcedGradient, ZeroSubderivativeChoiceDiffersByJump) {
  auto spec = one_point_spec(Activation::Relu, 3, 0.5, -0.4);
  const Vector q{0.3, 2.0, -0.7, 0.2, -1.0, 0.1, 0.9, -0.6, 0.4, 0.05};
  ASSERT_EQ(preactivations(spec.arch, q, Vector{0.5})[1], 0.0);
  const Vector g0 = grad_potential(spec, q);
  auto spec1 = spec;
  spec1.arch.zero_subderivative = 1.0;
  const Vector g1 = grad_potential(spec1, q);
  const Vector jump = grad_jump(spec, q, 0, 1);
  for (std::size_t k = 0; k < q.size(); ++k) EXPECT_NEAR(g1[k] - g0[k], jump[k], 1e-12);
  EXPECT_GT(std::abs(jump[4]) + std::abs(jump[1]), 0.0);
}

TEST(BnnPotential, SurfacesFollowActivation) {
  const BnnPotential relu(small_spec(Activation::Relu, {4, 3}, 5, 1));
  EXPECT_EQ(relu.surface_count(), 5u * 7u);
  EXPECT_TRUE(relu.surface_is_affine(2 * 7 + 3));
  EXPECT_FALSE(relu.surface_is_affine(2 * 7 + 4));
  const BnnPotential sig(small_spec(Activation::Sigmoid, {4}, 5, 1));
  EXPECT_EQ(sig.surface_count(), 0u);
}

TEST(BnnPotential, MatchesFreeFunctions) {
  const auto spec = small_spec(Activation::LeakyRelu, {6}, 8, 2);
  const BnnPotential pot(spec);
  std::mt19937_64 rng(1);
  const Vector q = ndhmc::testing::normal_vector(spec.arch.param_dim(), 1.0, rng);
  EXPECT_EQ(pot.value(q), potential(spec, q));
  EXPECT_EQ(pot.gradient(q), grad_potential(spec, q));
  Vector f(pot.surface_count());
  pot.surface_values(q, f);
  EXPECT_EQ(f, all_preactivations(spec, q));
}
