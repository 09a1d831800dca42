#include "ndhmc/bnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ndhmc {

double dot(ConstSpan a, ConstSpan b) {
  require(a.size() == b.size(), "dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(ConstSpan a) { return dot(a, a); }

double norm2(ConstSpan a) { return std::sqrt(squared_norm(a)); }

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Relu: return "relu";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Tanh: return "tanh";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "relu") return Activation::Relu;
  if (name == "leaky_relu" || name == "leaky-relu" || name == "leaky") return Activation::LeakyRelu;
  if (name == "tanh") return Activation::Tanh;
  throw ContractError("unknown activation: " + std::string(name));
}

bool is_piecewise_affine(Activation a) {
  return a == Activation::Relu || a == Activation::LeakyRelu;
}

int sign_of(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

void MLPArchitecture::validate() const {
  require(layer_dims.size() >= 2, "architecture needs at least input and output layers");
  for (auto w : layer_dims) require(w >= 1, "layer widths must be >= 1");
  require(std::isfinite(leaky_slope), "leaky_slope must be finite");
  if (is_piecewise_affine(activation)) {
    const double leak = activation == Activation::LeakyRelu ? leaky_slope : 0.0;
    require(zero_subderivative == 0.0 || zero_subderivative == 1.0 || zero_subderivative == leak,
            "zero_subderivative must be 0, 1 or the leaky slope");
  }
}

std::size_t MLPArchitecture::param_dim() const {
  std::size_t d = 0;
  for (std::size_t j = 1; j < layer_dims.size(); ++j) d += layer_dims[j] * (layer_dims[j - 1] + 1);
  return d;
}

std::size_t MLPArchitecture::hidden_units() const {
  std::size_t h = 0;
  for (std::size_t j = 1; j + 1 < layer_dims.size(); ++j) h += layer_dims[j];
  return h;
}

std::size_t MLPArchitecture::weight_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t j = 1; j < layer; ++j) off += layer_dims[j] * (layer_dims[j - 1] + 1);
  return off;
}

std::size_t MLPArchitecture::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + layer_dims[layer] * layer_dims[layer - 1];
}

std::size_t MLPArchitecture::hidden_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t j = 1; j < layer; ++j) off += layer_dims[j];
  return off;
}

std::size_t MLPArchitecture::layer_of_hidden(std::size_t neuron) const {
  std::size_t off = 0;
  for (std::size_t j = 1; j + 1 < layer_dims.size(); ++j) {
    off += layer_dims[j];
    if (neuron < off) return j;
  }
  throw ContractError("hidden neuron index out of range");
}

double MLPArchitecture::piece_slope(int sign) const {
  if (sign > 0) return 1.0;
  if (sign < 0) return activation == Activation::LeakyRelu ? leaky_slope : 0.0;
  return zero_subderivative;
}

MLPArchitecture make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                         std::size_t output_dim, Activation activation) {
  MLPArchitecture arch;
  arch.layer_dims.push_back(input_dim);
  arch.layer_dims.insert(arch.layer_dims.end(), hidden.begin(), hidden.end());
  arch.layer_dims.push_back(output_dim);
  arch.activation = activation;
  if (activation == Activation::LeakyRelu) arch.zero_subderivative = 0.0;
  arch.validate();
  return arch;
}

std::vector<LayerParams> unflatten(const MLPArchitecture& arch, ConstSpan flat) {
  require(flat.size() == arch.param_dim(), "unflatten: parameter length mismatch");
  std::vector<LayerParams> layers;
  std::size_t off = 0;
  for (std::size_t j = 1; j < arch.layer_dims.size(); ++j) {
    const std::size_t rows = arch.layer_dims[j], cols = arch.layer_dims[j - 1];
    LayerParams lp;
    lp.weights.assign(flat.begin() + off, flat.begin() + off + rows * cols);
    off += rows * cols;
    lp.bias.assign(flat.begin() + off, flat.begin() + off + rows);
    off += rows;
    layers.push_back(std::move(lp));
  }
  return layers;
}

Vector flatten(const MLPArchitecture& arch, const std::vector<LayerParams>& layers) {
  require(layers.size() == arch.num_layers(), "flatten: layer count mismatch");
  Vector flat;
  flat.reserve(arch.param_dim());
  for (std::size_t j = 1; j < arch.layer_dims.size(); ++j) {
    const auto& lp = layers[j - 1];
    require(lp.weights.size() == arch.layer_dims[j] * arch.layer_dims[j - 1] &&
                lp.bias.size() == arch.layer_dims[j],
            "flatten: layer shape mismatch");
    flat.insert(flat.end(), lp.weights.begin(), lp.weights.end());
    flat.insert(flat.end(), lp.bias.begin(), lp.bias.end());
  }
  return flat;
}

void RegressionDataset::validate(bool allow_empty) const {
  require(input_dim >= 1 && output_dim >= 1, "dataset dimensions must be >= 1");
  require(inputs.size() % input_dim == 0, "dataset inputs not a multiple of input_dim");
  require(targets.size() == size() * output_dim, "dataset targets shape mismatch");
  require(allow_empty || size() >= 1, "dataset must contain at least one point");
  for (double v : inputs) require(std::isfinite(v), "dataset inputs must be finite");
  for (double v : targets) require(std::isfinite(v), "dataset targets must be finite");
}

void PosteriorSpec::validate() const {
  arch.validate();
  data.validate(/*allow_empty=*/true);
  require(data.input_dim == arch.input_dim(), "dataset input_dim does not match architecture");
  require(data.output_dim == arch.output_dim(), "dataset output_dim does not match architecture");
  require(prior_scale > 0.0 && std::isfinite(prior_scale), "prior_scale must be > 0");
  require(noise_scale > 0.0 && std::isfinite(noise_scale), "noise_scale must be > 0");
}

namespace {

// Per-input forward state: pre[j-1] and act[j] hold layer j's pre-activation
// and output (act[0] = x); deriv[j-1] holds the activation slope of hidden
// layer j.
struct Pass {
  std::vector<Vector> pre;
  std::vector<Vector> act;
  std::vector<Vector> deriv;
};

class Network {
 public:
  explicit Network(const MLPArchitecture& arch) : arch_(arch) {
    const std::size_t m = arch.num_layers();
    pass_.pre.resize(m);
    pass_.act.resize(m + 1);
    pass_.deriv.resize(m);
    for (std::size_t j = 1; j <= m; ++j) {
      pass_.pre[j - 1].resize(arch.layer_dims[j]);
      pass_.act[j].resize(arch.layer_dims[j]);
      pass_.deriv[j - 1].resize(arch.layer_dims[j]);
    }
    pass_.act[0].resize(arch.input_dim());
    delta_.resize(*std::max_element(arch.layer_dims.begin(), arch.layer_dims.end()));
    back_.resize(delta_.size());
  }

  // `forced` points at hidden_units() signs, or is null for the actual signs.
  void run(ConstSpan q, ConstSpan x, const std::int8_t* forced) {
    const std::size_t m = arch_.num_layers();
    std::copy(x.begin(), x.end(), pass_.act[0].begin());
    std::size_t neuron = 0;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t rows = arch_.layer_dims[j], cols = arch_.layer_dims[j - 1];
      const double* w = q.data() + arch_.weight_offset(j);
      const double* b = w + rows * cols;
      const Vector& in = pass_.act[j - 1];
      Vector& pre = pass_.pre[j - 1];
      for (std::size_t r = 0; r < rows; ++r) {
        double s = b[r];
        const double* wr = w + r * cols;
        for (std::size_t c = 0; c < cols; ++c) s += wr[c] * in[c];
        pre[r] = s;
      }
      Vector& out = pass_.act[j];
      Vector& der = pass_.deriv[j - 1];
      if (j == m) {
        std::copy(pre.begin(), pre.end(), out.begin());
        continue;
      }
      for (std::size_t r = 0; r < rows; ++r, ++neuron) {
        const double a = pre[r];
        switch (arch_.activation) {
          case Activation::Sigmoid: {
            const double h = 1.0 / (1.0 + std::exp(-a));
            out[r] = h;
            der[r] = h * (1.0 - h);
            break;
          }
          case Activation::Tanh: {
            const double h = std::tanh(a);
            out[r] = h;
            der[r] = 1.0 - h * h;
            break;
          }
          case Activation::Relu:
          case Activation::LeakyRelu: {
            const int s = forced ? forced[neuron] : sign_of(a);
            const double slope = arch_.piece_slope(s);
            out[r] = slope * a;
            der[r] = slope;
            break;
          }
        }
      }
    }
  }

  // Accumulates the gradient of 0.5 * |f - y|^2 * scale into grad, using the
  // state left by the last run(). Returns 0.5 * |f - y|^2 * scale.
  double backprop(ConstSpan q, ConstSpan y, double scale, MutSpan grad) {
    const std::size_t m = arch_.num_layers();
    const Vector& out = pass_.act[m];
    double value = 0.0;
    for (std::size_t o = 0; o < out.size(); ++o) {
      const double r = out[o] - y[o];
      value += r * r;
      delta_[o] = r * scale;
    }
    for (std::size_t j = m; j >= 1; --j) {
      const std::size_t rows = arch_.layer_dims[j], cols = arch_.layer_dims[j - 1];
      const std::size_t woff = arch_.weight_offset(j);
      double* gw = grad.data() + woff;
      double* gb = gw + rows * cols;
      const Vector& in = pass_.act[j - 1];
      for (std::size_t r = 0; r < rows; ++r) {
        const double dr = delta_[r];
        gb[r] += dr;
        double* gwr = gw + r * cols;
        for (std::size_t c = 0; c < cols; ++c) gwr[c] += dr * in[c];
      }
      if (j == 1) break;
      const double* w = q.data() + woff;
      for (std::size_t c = 0; c < cols; ++c) back_[c] = 0.0;
      for (std::size_t r = 0; r < rows; ++r) {
        const double dr = delta_[r];
        const double* wr = w + r * cols;
        for (std::size_t c = 0; c < cols; ++c) back_[c] += wr[c] * dr;
      }
      const Vector& der = pass_.deriv[j - 2];
      for (std::size_t c = 0; c < cols; ++c) delta_[c] = back_[c] * der[c];
    }
    return 0.5 * value * scale;
  }

  double residual_value(ConstSpan y, double scale) const {
    const Vector& out = pass_.act.back();
    double value = 0.0;
    for (std::size_t o = 0; o < out.size(); ++o) {
      const double r = out[o] - y[o];
      value += r * r;
    }
    return 0.5 * value * scale;
  }

  const Vector& output() const { return pass_.act.back(); }

  void copy_hidden_preactivations(double* dst) const {
    for (std::size_t j = 1; j < arch_.num_layers(); ++j) {
      const Vector& pre = pass_.pre[j - 1];
      dst = std::copy(pre.begin(), pre.end(), dst);
    }
  }

 private:
  const MLPArchitecture& arch_;
  Pass pass_;
  Vector delta_;
  Vector back_;
};

void check_params(const MLPArchitecture& arch, ConstSpan q) {
  require(q.size() == arch.param_dim(), "parameter vector length does not match architecture");
}

double evaluate(const PosteriorSpec& spec, ConstSpan q, const ActivationPattern* forced,
                MutSpan grad, bool want_grad) {
  check_params(spec.arch, q);
  const double inv_prior = 1.0 / (spec.prior_scale * spec.prior_scale);
  const double inv_noise = 1.0 / (spec.noise_scale * spec.noise_scale);
  if (want_grad) {
    require(grad.size() == q.size(), "gradient buffer length mismatch");
    for (std::size_t k = 0; k < q.size(); ++k) grad[k] = q[k] * inv_prior;
  }
  double value = 0.0;
  Network net(spec.arch);
  const std::size_t n = spec.data.size();
  const std::size_t hidden = spec.arch.hidden_units();
  for (std::size_t i = 0; i < n; ++i) {
    const std::int8_t* row = forced ? forced->raw().data() + i * hidden : nullptr;
    net.run(q, spec.data.input(i), row);
    value += want_grad ? net.backprop(q, spec.data.target(i), inv_noise, grad)
                       : net.residual_value(spec.data.target(i), inv_noise);
  }
  value += 0.5 * squared_norm(q) * inv_prior;
  return value;
}

}  // namespace

Vector forward(const MLPArchitecture& arch, ConstSpan params, ConstSpan x) {
  check_params(arch, params);
  require(x.size() == arch.input_dim(), "forward: input length mismatch");
  Network net(arch);
  net.run(params, x, nullptr);
  return net.output();
}

Vector preactivations(const MLPArchitecture& arch, ConstSpan params, ConstSpan x) {
  check_params(arch, params);
  require(x.size() == arch.input_dim(), "preactivations: input length mismatch");
  Network net(arch);
  net.run(params, x, nullptr);
  Vector out(arch.hidden_units());
  net.copy_hidden_preactivations(out.data());
  return out;
}

Vector all_preactivations(const PosteriorSpec& spec, ConstSpan params) {
  check_params(spec.arch, params);
  const std::size_t hidden = spec.arch.hidden_units();
  Vector out(spec.data.size() * hidden);
  Network net(spec.arch);
  for (std::size_t i = 0; i < spec.data.size(); ++i) {
    net.run(params, spec.data.input(i), nullptr);
    net.copy_hidden_preactivations(out.data() + i * hidden);
  }
  return out;
}

ActivationPattern activation_pattern(const PosteriorSpec& spec, ConstSpan params) {
  const std::size_t hidden = spec.arch.hidden_units();
  const Vector pre = all_preactivations(spec, params);
  ActivationPattern pattern(spec.data.size(), hidden);
  for (std::size_t i = 0; i < spec.data.size(); ++i)
    for (std::size_t k = 0; k < hidden; ++k) pattern.set(i, k, sign_of(pre[i * hidden + k]));
  return pattern;
}

double potential(const PosteriorSpec& spec, ConstSpan q) {
  return evaluate(spec, q, nullptr, {}, false);
}

Vector grad_potential(const PosteriorSpec& spec, ConstSpan q) {
  Vector g(q.size());
  evaluate(spec, q, nullptr, g, true);
  return g;
}

double potential_and_gradient(const PosteriorSpec& spec, ConstSpan q, MutSpan grad) {
  return evaluate(spec, q, nullptr, grad, true);
}

Vector grad_potential_forced(const PosteriorSpec& spec, ConstSpan q,
                             const ActivationPattern& pattern) {
  if (!is_piecewise_affine(spec.arch.activation))
    throw UnsupportedError("pattern-forced gradients need a relu-family activation, got " +
                           std::string(to_string(spec.arch.activation)));
  require(pattern.n_points() == spec.data.size() && pattern.n_hidden() == spec.arch.hidden_units(),
          "activation pattern shape does not match the posterior");
  Vector g(q.size());
  evaluate(spec, q, &pattern, g, true);
  return g;
}

Vector grad_jump(const PosteriorSpec& spec, ConstSpan q, std::size_t point, std::size_t neuron) {
  require(point < spec.data.size() && neuron < spec.arch.hidden_units(),
          "grad_jump: surface index out of range");
  ActivationPattern pattern = activation_pattern(spec, q);
  pattern.set(point, neuron, +1);
  Vector after = grad_potential_forced(spec, q, pattern);
  pattern.set(point, neuron, -1);
  const Vector before = grad_potential_forced(spec, q, pattern);
  for (std::size_t k = 0; k < after.size(); ++k) after[k] -= before[k];
  return after;
}

}  // namespace ndhmc
