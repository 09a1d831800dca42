#pragma once

#include <cstddef>
#include <random>

#include "ndhmc/potential.hpp"

namespace ndhmc {

/// One-dimensional target density proportional to exp(-V(x)).
class Target1D {
 public:
  virtual ~Target1D() = default;
  virtual double value(double x) const = 0;
  virtual double derivative(double x) const = 0;
  /// Exact draw from exp(-V)/Z.
  virtual double sample(std::mt19937_64& rng) const = 0;
  virtual double cdf(double x) const = 0;
};

/// Continuous piecewise-affine V with sorted breakpoints and one slope per
/// piece (slopes.size() == breakpoints.size() + 1). V(0) equals
/// `value_at_zero`; the derivative at a breakpoint is `breakpoint_subgradient`.
class PiecewiseAffine1D final : public Target1D {
 public:
  PiecewiseAffine1D(Vector breakpoints, Vector slopes, double value_at_zero = 0.0,
                    double breakpoint_subgradient = 0.0);

  /// V(x) = |x|, the Laplace density.
  static PiecewiseAffine1D laplace();

  double value(double x) const override;
  double derivative(double x) const override;
  double sample(std::mt19937_64& rng) const override;
  double cdf(double x) const override;

  const Vector& breakpoints() const { return breakpoints_; }
  const Vector& slopes() const { return slopes_; }
  double slope_left(std::size_t b) const { return slopes_[b]; }
  double slope_right(std::size_t b) const { return slopes_[b + 1]; }
  /// exp(-V) integrates to a finite mass iff the outer slopes point inward.
  bool normalizable() const;
  double normalizer() const { return total_mass_; }

 private:
  double piece_mass(std::size_t piece) const;
  double knot_value(std::size_t b) const { return knot_values_[b]; }

  Vector breakpoints_;
  Vector slopes_;
  Vector knot_values_;
  Vector masses_;
  double total_mass_ = 0.0;
  double subgradient_ = 0.0;
};

/// Standard normal, V(x) = x^2 / 2. Smooth control for the proxy studies.
class StandardNormal1D final : public Target1D {
 public:
  double value(double x) const override { return 0.5 * x * x; }
  double derivative(double x) const override { return x; }
  double sample(std::mt19937_64& rng) const override;
  double cdf(double x) const override;
};

/// Product target U(q) = sum_k V(q_k) over d i.i.d. piecewise-affine
/// components. Surface k * n_breaks + b is {q : q_k = breakpoint_b}.
class ProductPotential final : public Potential {
 public:
  ProductPotential(PiecewiseAffine1D component, std::size_t dim);

  const PiecewiseAffine1D& component() const { return component_; }

  std::size_t dim() const override { return dim_; }
  double value(ConstSpan q) const override;
  double value_and_gradient(ConstSpan q, MutSpan grad) const override;

  std::size_t surface_count() const override { return dim_ * component_.breakpoints().size(); }
  void surface_values(ConstSpan q, MutSpan out) const override;
  double surface_value(ConstSpan q, std::size_t surface) const override;
  void one_sided_gradients(ConstSpan z, std::size_t surface, int sign_before, int sign_after,
                           MutSpan before, MutSpan after) const override;
  std::string describe_surface(std::size_t surface) const override;

 private:
  PiecewiseAffine1D component_;
  std::size_t dim_;
};

/// U(q) = |q|^2 / (2 scale^2).
class QuadraticPotential final : public Potential {
 public:
  explicit QuadraticPotential(std::size_t dim, double scale = 1.0) : dim_(dim), scale_(scale) {}
  std::size_t dim() const override { return dim_; }
  double value(ConstSpan q) const override;
  double value_and_gradient(ConstSpan q, MutSpan grad) const override;

 private:
  std::size_t dim_;
  double scale_;
};

/// U(q) = 0.
class FlatPotential final : public Potential {
 public:
  explicit FlatPotential(std::size_t dim) : dim_(dim) {}
  std::size_t dim() const override { return dim_; }
  double value(ConstSpan) const override { return 0.0; }
  double value_and_gradient(ConstSpan, MutSpan grad) const override;

 private:
  std::size_t dim_;
};

}  // namespace ndhmc
