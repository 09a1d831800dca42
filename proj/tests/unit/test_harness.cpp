#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ndhmc/csv.hpp"
#include "ndhmc/harness.hpp"
#include "ndhmc/nondiff.hpp"
#include "ndhmc/parallel.hpp"

using namespace ndhmc;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentManifest tiny_grid() {
  ExperimentManifest m = ExperimentManifest::defaults_for(ExperimentKind::Grid);
  m.architectures = {{5}};
  m.n_data = 20;
  m.n_samples = 3;
  m.burn_in = 1;
  m.repeats = 2;
  m.steps = {10, 20};
  m.epsilons = {0.001, 0.002};
  m.seed = 77;
  return m;
}

}  // namespace

TEST(Synthetic, RangesAndNoise) {
  const RegressionDataset data = generate_synthetic(100, 4);
  ASSERT_EQ(data.size(), 100u);
  double residual = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double x = data.inputs[i], y = data.targets[i];
    EXPECT_GT(x, 0.0);
    EXPECT_LT(x, 4.0);
    EXPECT_LT(std::abs(y - std::cos(2.0 * x)), 0.5);
    residual += y - std::cos(2.0 * x);
  }
  EXPECT_LE(std::abs(residual / 100.0), 0.03);
}

TEST(Synthetic, DeterministicPerSeed) {
  const auto a = generate_synthetic(50, 9), b = generate_synthetic(50, 9), c = generate_synthetic(50, 10);
  EXPECT_EQ(a.inputs, b.inputs);
  EXPECT_EQ(a.targets, b.targets);
  EXPECT_NE(a.inputs, c.inputs);
}

TEST(Seeds, SplitMixReferenceValues) {
  // Python reference implementation of the SplitMix64 finalizer.
  EXPECT_EQ(mix64(0), 16294208416658607535ULL);
  EXPECT_EQ(derive_seed(0, 0), 17448420733077208847ULL);
  EXPECT_EQ(derive_seed(42, 7), 2707671793207452428ULL);
  EXPECT_EQ(cell_seed(2024, 3, 1), 6158566523548447847ULL);
}

TEST(Manifest, DefaultsPerKind) {
  const auto sweep = ExperimentManifest::defaults_for(ExperimentKind::EfficiencySweep);
  ASSERT_TRUE(sweep.travel_time.has_value());
  EXPECT_EQ(*sweep.travel_time, 0.1);
  EXPECT_EQ(sweep.epsilons.size(), 8u);
  EXPECT_EQ(sweep.epsilons.back(), 0.004);
  const auto dims = ExperimentManifest::defaults_for(ExperimentKind::DimSweep);
  EXPECT_EQ(dims.steps, std::vector<std::size_t>{200});
  EXPECT_EQ(dims.epsilons, Vector{0.001});
  EXPECT_EQ(dims.architectures.size(), 9u);
}

TEST(Manifest, ErrorOrderStepRanges) {
  const auto m = ExperimentManifest::defaults_for(ExperimentKind::ErrorOrder);
  EXPECT_EQ(m.epsilons, dyadic_step_sizes(1e-5, 0, 6));
  EXPECT_EQ(m.crossing_epsilons, dyadic_step_sizes(1e-7, 0, 8));
  EXPECT_THROW(manifest_from_json(R"({"crossing_epsilons": [1e-7]})", ExperimentKind::ErrorOrder),
               ContractError);
  EXPECT_THROW(manifest_from_json(R"({"warm_step": 0})"), ContractError);
  const auto back = manifest_from_json(manifest_to_json(m));
  EXPECT_EQ(back.crossing_epsilons, m.crossing_epsilons);
  EXPECT_EQ(back.warm_iterations, m.warm_iterations);
}

TEST(Manifest, ParsesOverridesAndRejectsMismatch) {
  const auto m = manifest_from_json(
      R"({"kind": "grid", "activations": ["relu"], "steps": [5], "epsilons": [0.01], "repeats": 1})");
  EXPECT_EQ(m.activations, std::vector<Activation>{Activation::Relu});
  EXPECT_EQ(m.steps, std::vector<std::size_t>{5});
  EXPECT_EQ(m.n_samples, 2000u);
  EXPECT_THROW(manifest_from_json(R"({"kind": "grid"})", ExperimentKind::DimSweep), ContractError);
  EXPECT_THROW(manifest_from_json(R"({"kind": "nope"})"), ContractError);
  EXPECT_THROW(manifest_from_json(R"({"epsilons": [-1]})"), ContractError);
  EXPECT_THROW(manifest_from_json(R"({"repeats": "five"})"), ContractError);
  const auto sweep = manifest_from_json(R"({"n_samples": 10})", ExperimentKind::EfficiencySweep);
  EXPECT_EQ(sweep.kind, ExperimentKind::EfficiencySweep);
  EXPECT_TRUE(sweep.steps.empty());
}

TEST(Manifest, JsonRoundTrip) {
  ExperimentManifest m = tiny_grid();
  m.travel_time = 0.05;
  m.steps.clear();
  const auto back = manifest_from_json(manifest_to_json(m));
  EXPECT_EQ(manifest_to_json(back), manifest_to_json(m));
}

TEST(Grid, CardinalityOfFullGrid) {
  ExperimentManifest m = ExperimentManifest::defaults_for(ExperimentKind::Grid);
  m.n_data = 10;
  m.architectures = {{5}};
  m.n_samples = 1;
  m.burn_in = 0;
  const auto rows = run_grid(m, 8);
  EXPECT_EQ(rows.size(), 375u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].cell, i / 5);
    EXPECT_EQ(rows[i].repeat, i % 5);
    EXPECT_TRUE(rows[i].error.empty());
  }
}

TEST(Grid, SeedsAreRecomputable) {
  const ExperimentManifest m = tiny_grid();
  for (const ResultRow& r : run_grid(m, 2)) {
    EXPECT_EQ(r.seed, cell_seed(m.seed, r.cell, r.repeat));
    EXPECT_EQ(r.dim, 16u);
    EXPECT_DOUBLE_EQ(r.travel_time, r.step_size * static_cast<double>(r.steps));
    EXPECT_DOUBLE_EQ(r.efficiency, r.step_size * r.acceptance_rate);
  }
}

TEST(Grid, CsvIsByteIdenticalAcrossRunsAndWorkers) {
  const ExperimentManifest m = tiny_grid();
  std::ostringstream a, b;
  write_rows_csv(a, run_grid(m, 1));
  write_rows_csv(b, run_grid(m, 5));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')),
            "cell,activation,hidden,d,epsilon,L,T,repeat,seed,acceptance_rate,efficiency,"
            "n_divergent,mean_abs_delta_h,test_mse,error");
}

TEST(Grid, WarmUpIsSeededAndOptional) {
  ExperimentManifest m = tiny_grid();
  m.activations = {Activation::Relu};
  m.warm_iterations = 0;
  std::ostringstream cold, warm, warm_again;
  write_rows_csv(cold, run_grid(m, 1));
  m.warm_iterations = 5;
  write_rows_csv(warm, run_grid(m, 1));
  write_rows_csv(warm_again, run_grid(m, 2));
  EXPECT_NE(cold.str(), warm.str());
  EXPECT_EQ(warm.str(), warm_again.str());
}

TEST(Grid, TravelTimeSetsSteps) {
  ExperimentManifest m = tiny_grid();
  m.travel_time = 0.01;
  m.steps.clear();
  const auto rows = run_grid(m, 2);
  ASSERT_EQ(rows.size(), 3u * 2u * 2u);
  EXPECT_EQ(rows[0].steps, 10u);
  EXPECT_EQ(rows[2].steps, 5u);
}

TEST(Grid, FailingCellsAreRecordedNotThrown) {
  ExperimentManifest m = tiny_grid();
  m.activations = {Activation::Sigmoid, Activation::Relu};
  m.zero_subderivative = 0.5;  // invalid for relu only
  const auto rows = run_grid(m, 2);
  std::size_t failed = 0;
  for (const auto& r : rows) {
    if (r.activation == Activation::Relu) {
      EXPECT_FALSE(r.error.empty());
      EXPECT_TRUE(std::isnan(r.acceptance_rate));
      ++failed;
    } else {
      EXPECT_TRUE(r.error.empty());
    }
  }
  EXPECT_EQ(failed, rows.size() / 2);

  const auto dir = std::filesystem::temp_directory_path() / "ndhmc_failing_grid";
  std::ostringstream log;
  EXPECT_EQ(run_experiment(m, dir, 2, log), failed);
  const CsvTable t = read_csv_file(dir / "grid.csv");
  EXPECT_EQ(t.rows.size(), rows.size());
  std::filesystem::remove_all(dir);
}

TEST(Grid, TestMseReportedWhenRequested) {
  ExperimentManifest m = tiny_grid();
  m.activations = {Activation::Sigmoid};
  m.n_test = 10;
  for (const auto& r : run_grid(m, 1)) EXPECT_TRUE(std::isfinite(r.test_mse));
}

TEST(Summaries, EfficiencyOptimumPicksPeak) {
  std::vector<ResultRow> rows;
  const double eps[] = {0.001, 0.002, 0.003};
  const double acc[] = {0.9, 0.8, 0.2};
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t r = 0; r < 2; ++r) {
      ResultRow row;
      row.cell = c;
      row.repeat = r;
      row.activation = Activation::Relu;
      row.step_size = eps[c];
      row.acceptance_rate = acc[c] + (r ? 0.05 : -0.05);
      rows.push_back(row);
    }
  const auto cells = summarize_cells(rows);
  ASSERT_EQ(cells.size(), 3u);
  EXPECT_NEAR(cells[1].mean_acceptance, 0.8, 1e-12);
  EXPECT_NEAR(cells[1].se_acceptance, 0.05, 1e-12);
  const auto optima = efficiency_optima(rows);
  ASSERT_EQ(optima.size(), 1u);
  EXPECT_EQ(optima[0].best_step_size, 0.002);
  EXPECT_NEAR(optima[0].optimal_acceptance, 0.8, 1e-12);
  EXPECT_NEAR(optima[0].peak_efficiency, 0.0016, 1e-15);
}

TEST(Experiment, WritesCsvAndSummary) {
  const auto dir = std::filesystem::temp_directory_path() / "ndhmc_experiment_test";
  std::filesystem::remove_all(dir);
  ExperimentManifest m = ExperimentManifest::defaults_for(ExperimentKind::TuningCurves);
  m.grid_points = 50;
  std::ostringstream log;
  EXPECT_EQ(run_experiment(m, dir, 1, log), 0u);
  const CsvTable t = read_csv_file(dir / "tuning_curves.csv");
  EXPECT_EQ(t.rows.size(), 100u);
  EXPECT_TRUE(std::filesystem::exists(dir / "tuning_curves.json"));

  ExperimentManifest data = ExperimentManifest::defaults_for(ExperimentKind::GenerateData);
  data.n_data = 7;
  run_experiment(data, dir, 1, log);
  EXPECT_EQ(read_csv_file(dir / "synthetic.csv").rows.size(), 7u);
  std::filesystem::remove_all(dir);
}

TEST(Experiment, RerunIsByteIdentical) {
  const auto dir = std::filesystem::temp_directory_path() / "ndhmc_rerun_test";
  std::filesystem::remove_all(dir);
  ExperimentManifest m = ExperimentManifest::defaults_for(ExperimentKind::CrossingStats);
  m.crossing_samples = 3000;
  std::ostringstream log;
  run_experiment(m, dir, 1, log);
  const std::string first = slurp(dir / "crossing_stats.csv");
  run_experiment(m, dir, 3, log);
  EXPECT_EQ(slurp(dir / "crossing_stats.csv"), first);
  std::filesystem::remove_all(dir);
}
