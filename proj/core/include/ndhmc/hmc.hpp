#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "ndhmc/bnn.hpp"
#include "ndhmc/symplectic.hpp"

namespace ndhmc {

struct HMCConfig {
  double step_size = 1e-3;
  /// Exactly one of `steps` (L) and `travel_time` (T, with L = round(T / eps)).
  std::optional<std::size_t> steps;
  std::optional<double> travel_time;
  std::size_t n_samples = 1000;
  std::size_t burn_in = 100;
  std::uint64_t seed = 0;
  double divergence_cap = 1e6;
  bool keep_samples = true;

  void validate() const;
  std::size_t resolved_steps() const;
};

struct ChainResult {
  std::vector<Vector> samples;  // post burn-in positions
  std::size_t n_proposals = 0;
  std::size_t n_accepted = 0;
  std::size_t n_divergent = 0;
  double acceptance_rate = 0.0;  // n_accepted / n_proposals
  /// One entry per proposal; divergent proposals record +inf.
  Vector delta_h;
  double seconds = 0.0;
};

/// min(1, exp(-delta_h)); 0 for non-finite delta_h.
double accept_probability(double delta_h);

/// Metropolis-adjusted HMC. Per iteration the RNG stream yields d standard
/// normal momentum draws followed by one uniform, whether or not the uniform
/// is needed. Final momentum negation is skipped since K(p) = K(-p).
ChainResult hmc_chain(const Potential& potential, const Vector& init, const HMCConfig& config);

/// Draw from the isotropic normal prior N(0, prior_scale^2 I) using a stream
/// derived from `seed` (independent of the chain's own stream).
Vector prior_draw(std::size_t dim, double prior_scale, std::uint64_t seed);

struct Prediction {
  Vector mean;                      // output_dim
  std::vector<Vector> per_sample;  // one forward output per sample
};

Prediction posterior_predict(const PosteriorSpec& spec, const std::vector<Vector>& samples,
                             ConstSpan x);

/// Mean of squared differences over all coordinates.
double mse(ConstSpan predictions, ConstSpan targets);

/// Test-set MSE of the posterior predictive mean.
double predictive_mse(const PosteriorSpec& spec, const std::vector<Vector>& samples,
                      const RegressionDataset& test);

std::string chain_summary_json(const ChainResult& result, const HMCConfig& config, int indent = 2);
/// Sample dump: uint64 sample count, then each sample in the parameter
/// binary format.
void save_samples_binary(const std::filesystem::path& path, const std::vector<Vector>& samples);
std::vector<Vector> load_samples_binary(const std::filesystem::path& path);

}  // namespace ndhmc
