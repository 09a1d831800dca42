#include "ndhmc/potential.hpp"

#include <algorithm>

namespace ndhmc {

void Potential::surface_values(ConstSpan q, MutSpan out) const {
  for (std::size_t i = 0; i < surface_count(); ++i) out[i] = surface_value(q, i);
}

double Potential::surface_value(ConstSpan, std::size_t) const {
  throw UnsupportedError("potential has no non-differentiability surfaces");
}

void Potential::one_sided_gradients(ConstSpan, std::size_t, int, int, MutSpan, MutSpan) const {
  throw UnsupportedError("potential has no non-differentiability surfaces");
}

std::string Potential::describe_surface(std::size_t surface) const {
  return "{\"surface\":" + std::to_string(surface) + "}";
}

BnnPotential::BnnPotential(PosteriorSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  dim_ = spec_.arch.param_dim();
  hidden_ = spec_.arch.hidden_units();
  // Smooth activations have no surfaces.
  surfaces_ = is_piecewise_affine(spec_.arch.activation) ? spec_.data.size() * hidden_ : 0;
}

double BnnPotential::value(ConstSpan q) const { return potential(spec_, q); }

double BnnPotential::value_and_gradient(ConstSpan q, MutSpan grad) const {
  return potential_and_gradient(spec_, q, grad);
}

bool BnnPotential::surface_is_affine(std::size_t surface) const {
  return spec_.arch.layer_of_hidden(surface_neuron(surface)) == 1;
}

void BnnPotential::surface_values(ConstSpan q, MutSpan out) const {
  require(out.size() == surfaces_, "surface_values: buffer length mismatch");
  const Vector pre = all_preactivations(spec_, q);
  std::copy(pre.begin(), pre.end(), out.begin());
}

double BnnPotential::surface_value(ConstSpan q, std::size_t surface) const {
  require(surface < surfaces_, "surface index out of range");
  return preactivations(spec_.arch, q, spec_.data.input(surface_point(surface)))[surface_neuron(surface)];
}

void BnnPotential::one_sided_gradients(ConstSpan z, std::size_t surface, int sign_before,
                                       int sign_after, MutSpan before, MutSpan after) const {
  require(surface < surfaces_, "surface index out of range");
  ActivationPattern pattern = activation_pattern(spec_, z);
  const std::size_t point = surface_point(surface), neuron = surface_neuron(surface);
  pattern.set(point, neuron, sign_before);
  const Vector gb = grad_potential_forced(spec_, z, pattern);
  pattern.set(point, neuron, sign_after);
  const Vector ga = grad_potential_forced(spec_, z, pattern);
  std::copy(gb.begin(), gb.end(), before.begin());
  std::copy(ga.begin(), ga.end(), after.begin());
}

std::string BnnPotential::describe_surface(std::size_t surface) const {
  const std::size_t neuron = surface_neuron(surface);
  const std::size_t layer = spec_.arch.layer_of_hidden(neuron);
  return "{\"kind\":\"neuron\",\"point\":" + std::to_string(surface_point(surface)) +
         ",\"layer\":" + std::to_string(layer) +
         ",\"neuron\":" + std::to_string(neuron - spec_.arch.hidden_offset(layer)) + "}";
}

}  // namespace ndhmc
