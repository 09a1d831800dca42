#include <benchmark/benchmark.h>

#include <random>

#include "ndhmc/harness.hpp"
#include "ndhmc/potential.hpp"
#include "ndhmc/symplectic.hpp"

using namespace ndhmc;

namespace {

PosteriorSpec spec_for(Activation act, std::size_t width) {
  PosteriorSpec spec;
  spec.arch = make_mlp(1, {width}, 1, act);
  spec.data = generate_synthetic(100, 1);
  return spec;
}

PhasePoint random_state(std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  PhasePoint s{Vector(d), Vector(d)};
  for (double& v : s.q) v = normal(rng);
  for (double& v : s.p) v = normal(rng);
  return s;
}

void BM_Gradient(benchmark::State& state) {
  const PosteriorSpec spec =
      spec_for(static_cast<Activation>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  const PhasePoint s = random_state(spec.arch.param_dim(), 3);
  Vector grad(spec.arch.param_dim());
  for (auto _ : state) benchmark::DoNotOptimize(potential_and_gradient(spec, s.q, grad));
  state.SetLabel(std::string(to_string(spec.arch.activation)));
}
BENCHMARK(BM_Gradient)
    ->Args({static_cast<int>(Activation::Sigmoid), 50})
    ->Args({static_cast<int>(Activation::Relu), 50})
    ->Args({static_cast<int>(Activation::Relu), 400});

void BM_LeapfrogStep(benchmark::State& state) {
  const BnnPotential pot(spec_for(static_cast<Activation>(state.range(0)), 50));
  const PhasePoint s = random_state(pot.dim(), 4);
  IntegratorOptions opts;
  opts.detect_crossings = state.range(1) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(leapfrog_step(pot, s, 1e-3, opts));
  state.SetLabel(std::string(to_string(static_cast<Activation>(state.range(0)))) +
                 (opts.detect_crossings ? " +crossings" : ""));
}
BENCHMARK(BM_LeapfrogStep)
    ->Args({static_cast<int>(Activation::Sigmoid), 0})
    ->Args({static_cast<int>(Activation::Relu), 0})
    ->Args({static_cast<int>(Activation::Relu), 1});

void BM_DetectCrossings(benchmark::State& state) {
  std::vector<std::size_t> hidden(static_cast<std::size_t>(state.range(0)), 20);
  PosteriorSpec spec;
  spec.arch = make_mlp(1, hidden, 1, Activation::Relu);
  spec.data = generate_synthetic(100, 1);
  const BnnPotential pot(spec);
  const PhasePoint s = random_state(pot.dim(), 5);
  for (auto _ : state) benchmark::DoNotOptimize(detect_crossings(pot, s.q, s.p, 1e-2));
}
BENCHMARK(BM_DetectCrossings)->Arg(1)->Arg(2);

}  // namespace
BENCHMARK_MAIN();
