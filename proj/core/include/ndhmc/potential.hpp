#pragma once

#include <cstddef>
#include <string>

#include "ndhmc/bnn.hpp"
#include "ndhmc/types.hpp"

namespace ndhmc {

/// A potential energy U(q) with a gradient that is a deterministic function
/// of q. Potentials whose gradient jumps across surfaces f_i(q) = 0 expose
/// those surface functions so integrators can locate crossings.
class Potential {
 public:
  virtual ~Potential() = default;

  virtual std::size_t dim() const = 0;
  virtual double value(ConstSpan q) const = 0;
  /// Writes dU/dq into grad and returns U(q).
  virtual double value_and_gradient(ConstSpan q, MutSpan grad) const = 0;

  Vector gradient(ConstSpan q) const {
    Vector g(dim());
    value_and_gradient(q, g);
    return g;
  }

  virtual std::size_t surface_count() const { return 0; }
  /// Whether f_i is affine in q, so its root along a line is exact.
  virtual bool surface_is_affine(std::size_t /*surface*/) const { return true; }
  /// All surface function values at q; out has surface_count() entries.
  virtual void surface_values(ConstSpan q, MutSpan out) const;
  virtual double surface_value(ConstSpan q, std::size_t surface) const;
  /// Gradients of the two smooth pieces meeting at z on `surface`. The
  /// piece is selected by the sign of f_surface on each side.
  virtual void one_sided_gradients(ConstSpan z, std::size_t surface, int sign_before,
                                   int sign_after, MutSpan before, MutSpan after) const;
  virtual std::string describe_surface(std::size_t surface) const;
};

/// Posterior potential of a Bayesian MLP. Surface i * hidden_units() + k is
/// the zero set of hidden neuron k's pre-activation on data point i.
class BnnPotential final : public Potential {
 public:
  explicit BnnPotential(PosteriorSpec spec);

  const PosteriorSpec& spec() const { return spec_; }

  std::size_t dim() const override { return dim_; }
  double value(ConstSpan q) const override;
  double value_and_gradient(ConstSpan q, MutSpan grad) const override;

  std::size_t surface_count() const override { return surfaces_; }
  bool surface_is_affine(std::size_t surface) const override;
  void surface_values(ConstSpan q, MutSpan out) const override;
  double surface_value(ConstSpan q, std::size_t surface) const override;
  void one_sided_gradients(ConstSpan z, std::size_t surface, int sign_before, int sign_after,
                           MutSpan before, MutSpan after) const override;
  std::string describe_surface(std::size_t surface) const override;

  std::size_t surface_point(std::size_t surface) const { return surface / hidden_; }
  std::size_t surface_neuron(std::size_t surface) const { return surface % hidden_; }

 private:
  PosteriorSpec spec_;
  std::size_t dim_ = 0;
  std::size_t hidden_ = 0;
  std::size_t surfaces_ = 0;
};

}  // namespace ndhmc
