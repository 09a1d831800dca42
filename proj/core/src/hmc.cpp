#include "ndhmc/hmc.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "ndhmc/bnn_io.hpp"
#include "ndhmc/parallel.hpp"

namespace ndhmc {

void HMCConfig::validate() const {
  require(step_size > 0.0 && std::isfinite(step_size), "HMCConfig: step_size must be > 0");
  require(steps.has_value() != travel_time.has_value(),
          "HMCConfig: give exactly one of steps and travel_time");
  if (steps) require(*steps >= 1, "HMCConfig: steps must be >= 1");
  if (travel_time) require(*travel_time > 0.0, "HMCConfig: travel_time must be > 0");
  require(n_samples >= 1, "HMCConfig: n_samples must be >= 1");
  require(divergence_cap > 0.0, "HMCConfig: divergence_cap must be > 0");
}

std::size_t HMCConfig::resolved_steps() const {
  if (steps) return *steps;
  return static_cast<std::size_t>(std::max(1.0, std::round(*travel_time / step_size)));
}

double accept_probability(double delta_h) {
  if (!std::isfinite(delta_h)) return 0.0;
  if (delta_h <= 0.0) return 1.0;
  return std::exp(-delta_h);
}

ChainResult hmc_chain(const Potential& potential, const Vector& init, const HMCConfig& config) {
  config.validate();
  const std::size_t d = potential.dim();
  require(init.size() == d, "hmc_chain: init dimension mismatch");
  for (double v : init) require(std::isfinite(v), "hmc_chain: init must be finite");
  const std::size_t L = config.resolved_steps();
  const auto t0 = std::chrono::steady_clock::now();

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  ChainResult result;
  const std::size_t total = config.burn_in + config.n_samples;
  result.delta_h.reserve(total);
  if (config.keep_samples) result.samples.reserve(config.n_samples);

  PhasePoint state{init, Vector(d)};
  for (std::size_t it = 0; it < total; ++it) {
    for (double& v : state.p) v = normal(rng);
    const double u = uniform(rng);
    const Integration run = integrate(potential, state, config.step_size, L, config.divergence_cap);
    if (run.divergent) {
      ++result.n_divergent;
      result.delta_h.push_back(INFINITY);
    } else {
      result.delta_h.push_back(run.delta_h);
      if (u < accept_probability(run.delta_h)) {
        state.q = run.final_state.q;
        ++result.n_accepted;
      }
    }
    ++result.n_proposals;
    if (it >= config.burn_in && config.keep_samples) result.samples.push_back(state.q);
  }
  result.acceptance_rate =
      static_cast<double>(result.n_accepted) / static_cast<double>(result.n_proposals);
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

Vector prior_draw(std::size_t dim, double prior_scale, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0x5052494f52ULL));
  std::normal_distribution<double> normal(0.0, prior_scale);
  Vector q(dim);
  for (double& v : q) v = normal(rng);
  return q;
}

Prediction posterior_predict(const PosteriorSpec& spec, const std::vector<Vector>& samples,
                             ConstSpan x) {
  require(!samples.empty(), "posterior_predict: need at least one sample");
  Prediction pred;
  pred.mean.assign(spec.arch.output_dim(), 0.0);
  for (const Vector& s : samples) {
    Vector out = forward(spec.arch, s, x);
    for (std::size_t o = 0; o < out.size(); ++o) pred.mean[o] += out[o];
    pred.per_sample.push_back(std::move(out));
  }
  for (double& m : pred.mean) m /= static_cast<double>(samples.size());
  return pred;
}

double mse(ConstSpan predictions, ConstSpan targets) {
  require(predictions.size() == targets.size() && !targets.empty(), "mse: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double r = predictions[i] - targets[i];
    s += r * r;
  }
  return s / static_cast<double>(targets.size());
}

double predictive_mse(const PosteriorSpec& spec, const std::vector<Vector>& samples,
                      const RegressionDataset& test) {
  Vector preds;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Prediction p = posterior_predict(spec, samples, test.input(i));
    preds.insert(preds.end(), p.mean.begin(), p.mean.end());
  }
  return mse(preds, test.targets);
}

std::string chain_summary_json(const ChainResult& result, const HMCConfig& config, int indent) {
  using nlohmann::json;
  std::size_t finite = 0;
  double sum_abs = 0.0;
  for (double dh : result.delta_h)
    if (std::isfinite(dh)) {
      sum_abs += std::abs(dh);
      ++finite;
    }
  json j{{"step_size", config.step_size},
         {"steps", config.resolved_steps()},
         {"n_samples", config.n_samples},
         {"burn_in", config.burn_in},
         {"seed", config.seed},
         {"divergence_cap", config.divergence_cap},
         {"n_proposals", result.n_proposals},
         {"n_accepted", result.n_accepted},
         {"n_divergent", result.n_divergent},
         {"acceptance_rate", result.acceptance_rate},
         {"mean_abs_delta_h", finite ? sum_abs / static_cast<double>(finite) : 0.0},
         {"seconds", result.seconds}};
  if (config.travel_time) j["travel_time"] = *config.travel_time;
  return j.dump(indent);
}

void save_samples_binary(const std::filesystem::path& path, const std::vector<Vector>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  // The count header reuses the parameter format's length encoding.
  static_assert(std::endian::native == std::endian::little,
                "sample dumps assume a little-endian host");
  const std::uint64_t n = samples.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (const Vector& s : samples) write_params_binary(out, s);
}

std::vector<Vector> load_samples_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::uint64_t n = 0;
  if (!in.read(reinterpret_cast<char*>(&n), sizeof n))
    throw std::runtime_error("load_samples_binary: missing header");
  std::vector<Vector> samples;
  for (std::uint64_t i = 0; i < n; ++i) samples.push_back(read_params_binary(in));
  return samples;
}

}  // namespace ndhmc
