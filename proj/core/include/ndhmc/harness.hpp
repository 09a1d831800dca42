#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ndhmc/bnn.hpp"
#include "ndhmc/hmc.hpp"

namespace ndhmc {

/// n points with x ~ uniform(0, 4) and y ~ N(cos(2x), noise^2).
RegressionDataset generate_synthetic(std::size_t n = 100, std::uint64_t seed = 0,
                                     double noise = 0.1);

enum class ExperimentKind {
  GenerateData,
  Grid,
  EfficiencySweep,
  DimSweep,
  ErrorOrder,
  CrossingStats,
  ProxyScaling,
  TuningCurves,
};

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& name);

/// JSON manifest describing one experiment. Every field has a default, so a
/// manifest only needs the fields that differ; see README for the schema.
struct ExperimentManifest {
  ExperimentKind kind = ExperimentKind::Grid;
  std::uint64_t seed = 0;
  std::string output = "";  // CSV file name inside the output directory

  // BNN chains (grid, efficiency-sweep, dim-sweep, error-order).
  std::vector<Activation> activations{Activation::Sigmoid, Activation::Relu,
                                      Activation::LeakyRelu};
  std::vector<std::vector<std::size_t>> architectures{{50}};  // hidden widths
  Vector epsilons{0.0005, 0.0010, 0.0015, 0.0020, 0.0025};
  std::vector<std::size_t> steps{200, 400, 600, 800, 1000};
  std::optional<double> travel_time;  // replaces `steps` when set
  std::size_t n_samples = 2000;
  std::size_t burn_in = 100;
  std::size_t repeats = 5;
  std::size_t n_data = 100;
  std::size_t n_test = 0;
  std::uint64_t data_seed = 20240101;
  double prior_scale = 1.0;
  double noise_scale = 0.1;
  double zero_subderivative = 0.0;
  double divergence_cap = 1e6;
  // Chains and error-order anchors start from a prior draw moved by
  // `warm_iterations` unreported HMC transitions (0 = the prior draw itself).
  std::size_t warm_iterations = 100;
  double warm_step = 0.0005;
  std::size_t warm_steps = 100;

  // error-order
  std::string regime = "local";  // local | global
  Vector crossing_epsilons;  // local steps for ReLU-family nets; `epsilons` otherwise
  double crossing_fraction = 0.25;
  std::size_t error_starts = 1;

  // crossing-stats
  std::string target = "laplace";  // laplace | bnn
  double crossing_step = 0.1;
  std::size_t crossing_samples = 20000;
  Vector a_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

  // proxy-scaling
  double l = 1.0;
  std::vector<std::size_t> dims{16, 64, 256, 1024};
  std::size_t samples_per_dim = 2000;
  double exponent = 0.5;
  double proxy_travel_time = 1.0;
  double sigma_step = 0.01;
  std::size_t sigma_samples = 200000;

  // tuning-curves
  std::vector<int> orders{1, 2};
  Vector sigmas{1.0};
  std::size_t grid_points = 1000;

  /// Manifest defaults adjusted for `kind` (e.g. efficiency-sweep uses
  /// T = 0.1 and eps up to 0.004; dim-sweep uses L = 200, eps = 0.001).
  static ExperimentManifest defaults_for(ExperimentKind kind);
  void validate() const;
  std::string default_output() const;
};

/// Fields absent from the JSON keep the defaults of its "kind". When
/// `expected` is given, a missing "kind" means `expected` and a different
/// one is an error.
ExperimentManifest manifest_from_json(const std::string& text,
                                      std::optional<ExperimentKind> expected = std::nullopt);
std::string manifest_to_json(const ExperimentManifest& manifest, int indent = 2);
ExperimentManifest load_manifest(const std::filesystem::path& path,
                                 std::optional<ExperimentKind> expected = std::nullopt);

/// Seed of (cell, repeat): derive_seed(derive_seed(master, cell), repeat).
std::uint64_t cell_seed(std::uint64_t master, std::uint64_t cell, std::uint64_t repeat);

std::string hidden_label(const std::vector<std::size_t>& hidden);

struct ResultRow {
  std::size_t cell = 0;
  Activation activation = Activation::Sigmoid;
  std::string hidden;
  std::size_t dim = 0;
  double step_size = 0.0;
  std::size_t steps = 0;
  double travel_time = 0.0;  // eps * L
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  double acceptance_rate = std::nan("");
  double efficiency = std::nan("");  // eps * acceptance_rate
  std::size_t n_divergent = 0;
  double mean_abs_delta_h = std::nan("");
  double test_mse = std::nan("");
  double seconds = 0.0;  // reported in the JSON summary only
  std::string error;     // empty unless the cell crashed
};

/// Runs one HMC chain per (cell, repeat) of a grid, efficiency-sweep or
/// dim-sweep manifest. Cells are activations x architectures x L (or T) x
/// eps in that nesting order. Rows are ordered by (cell, repeat) regardless
/// of `workers`. A crashing cell is recorded in its row, never rethrown.
std::vector<ResultRow> run_grid(const ExperimentManifest& manifest, std::size_t workers = 1);

/// Columns: cell,activation,hidden,d,epsilon,L,T,repeat,seed,acceptance_rate,
/// efficiency,n_divergent,mean_abs_delta_h,test_mse,error
void write_rows_csv(std::ostream& out, const std::vector<ResultRow>& rows);

/// Repeat-averaged view of one cell.
struct CellSummary {
  std::size_t cell = 0;
  Activation activation = Activation::Sigmoid;
  std::string hidden;
  std::size_t dim = 0;
  double step_size = 0.0;
  std::size_t steps = 0;
  double mean_acceptance = 0.0;
  double se_acceptance = 0.0;
  double mean_efficiency = 0.0;
  std::size_t repeats = 0;
};

std::vector<CellSummary> summarize_cells(const std::vector<ResultRow>& rows);

/// Empirical efficiency optimum of one activation in an efficiency sweep.
struct EfficiencyOptimum {
  Activation activation = Activation::Sigmoid;
  double best_step_size = 0.0;
  double peak_efficiency = 0.0;
  double optimal_acceptance = 0.0;
};

std::vector<EfficiencyOptimum> efficiency_optima(const std::vector<ResultRow>& rows);

/// Runs the experiment described by `manifest`, writing its CSV (and a JSON
/// summary next to it) under `out_dir`. Returns the number of crashed cells.
std::size_t run_experiment(const ExperimentManifest& manifest, const std::filesystem::path& out_dir,
                           std::size_t workers, std::ostream& log);

}  // namespace ndhmc
