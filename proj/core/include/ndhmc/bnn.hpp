#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ndhmc/types.hpp"

namespace ndhmc {

enum class Activation { Sigmoid, Relu, LeakyRelu, Tanh };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// True for relu and leaky_relu: activations whose only kink is at 0.
bool is_piecewise_affine(Activation a);

/// Layer widths [d_0, ..., d_M] plus activation. Parameters are flattened
/// layer by layer; within layer j the row-major weight matrix A_j
/// (d_j x d_{j-1}) comes first, followed by the bias b_j.
struct MLPArchitecture {
  std::vector<std::size_t> layer_dims;
  Activation activation = Activation::Sigmoid;
  double leaky_slope = 0.01;
  /// Value used for the activation derivative at exactly 0.
  double zero_subderivative = 0.0;

  void validate() const;

  std::size_t num_layers() const { return layer_dims.size() - 1; }
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  std::size_t param_dim() const;
  /// Number of hidden neurons, i.e. sum of d_1..d_{M-1}.
  std::size_t hidden_units() const;

  std::size_t weight_offset(std::size_t layer) const;  // layer in [1, M]
  std::size_t bias_offset(std::size_t layer) const;
  /// Offset of the first neuron of hidden layer `layer` in the concatenated
  /// pre-activation vector.
  std::size_t hidden_offset(std::size_t layer) const;
  /// Hidden layer index (1-based) of a concatenated neuron index.
  std::size_t layer_of_hidden(std::size_t neuron) const;

  /// Slope of the activation on the piece selected by `sign` (+1, -1, 0).
  double piece_slope(int sign) const;
};

MLPArchitecture make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                         std::size_t output_dim, Activation activation);

struct LayerParams {
  Vector weights;  // row-major d_j x d_{j-1}
  Vector bias;     // d_j
};

std::vector<LayerParams> unflatten(const MLPArchitecture& arch, ConstSpan flat);
Vector flatten(const MLPArchitecture& arch, const std::vector<LayerParams>& layers);

struct RegressionDataset {
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  Vector inputs;   // n x input_dim, row-major
  Vector targets;  // n x output_dim, row-major

  std::size_t size() const { return input_dim == 0 ? 0 : inputs.size() / input_dim; }
  ConstSpan input(std::size_t i) const { return {inputs.data() + i * input_dim, input_dim}; }
  ConstSpan target(std::size_t i) const { return {targets.data() + i * output_dim, output_dim}; }
  /// Checks shapes and finiteness. `allow_empty` admits n = 0, which is
  /// useful for prior-only potentials.
  void validate(bool allow_empty = false) const;
};

struct PosteriorSpec {
  MLPArchitecture arch;
  RegressionDataset data;
  double prior_scale = 1.0;
  double noise_scale = 0.1;

  void validate() const;
};

/// Per data point, per hidden neuron: sign of the pre-activation.
class ActivationPattern {
 public:
  ActivationPattern() = default;
  ActivationPattern(std::size_t n_points, std::size_t n_hidden)
      : n_points_(n_points), n_hidden_(n_hidden), signs_(n_points * n_hidden, 0) {}

  std::size_t n_points() const { return n_points_; }
  std::size_t n_hidden() const { return n_hidden_; }
  std::int8_t at(std::size_t point, std::size_t neuron) const {
    return signs_[point * n_hidden_ + neuron];
  }
  void set(std::size_t point, std::size_t neuron, int sign) {
    signs_[point * n_hidden_ + neuron] = static_cast<std::int8_t>(sign > 0 ? 1 : (sign < 0 ? -1 : 0));
  }
  const std::vector<std::int8_t>& raw() const { return signs_; }

  friend bool operator==(const ActivationPattern&, const ActivationPattern&) = default;

 private:
  std::size_t n_points_ = 0;
  std::size_t n_hidden_ = 0;
  std::vector<std::int8_t> signs_;
};

int sign_of(double v);

Vector forward(const MLPArchitecture& arch, ConstSpan params, ConstSpan x);

/// Hidden-layer pre-activations A_j h_{j-1} + b_j for j = 1..M-1,
/// concatenated. Their zero sets are the non-differentiability surfaces.
Vector preactivations(const MLPArchitecture& arch, ConstSpan params, ConstSpan x);

/// Pre-activations of every data point, n x hidden_units(), row-major.
Vector all_preactivations(const PosteriorSpec& spec, ConstSpan params);

ActivationPattern activation_pattern(const PosteriorSpec& spec, ConstSpan params);

/// U(q) = |q|^2 / (2 s_p^2) + sum_i |f_q(x_i) - y_i|^2 / (2 s_n^2).
double potential(const PosteriorSpec& spec, ConstSpan q);

/// Reverse-mode gradient of `potential`. At a zero pre-activation the
/// architecture's zero_subderivative is used.
Vector grad_potential(const PosteriorSpec& spec, ConstSpan q);

/// Potential and gradient in one pass. `grad` must have length d.
double potential_and_gradient(const PosteriorSpec& spec, ConstSpan q, MutSpan grad);

/// Backprop with every hidden neuron's piece taken from `pattern` instead
/// of the actual pre-activation sign. The forward pass also uses the forced
/// pieces, so the result is the exact gradient of the polynomial piece
/// selected by the pattern. ReLU-family activations only.
Vector grad_potential_forced(const PosteriorSpec& spec, ConstSpan q,
                             const ActivationPattern& pattern);

/// Gradient on the positive side of surface (point, neuron) minus the
/// gradient on its negative side. Every other neuron keeps the sign it has
/// at q.
Vector grad_jump(const PosteriorSpec& spec, ConstSpan q, std::size_t point, std::size_t neuron);

}  // namespace ndhmc
