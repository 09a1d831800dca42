#include "ndhmc/proxy.hpp"

#include <algorithm>
#include <cmath>

#include "ndhmc/stats.hpp"

namespace ndhmc {

PiecewiseAffine1D::PiecewiseAffine1D(Vector breakpoints, Vector slopes, double value_at_zero,
                                     double breakpoint_subgradient)
    : breakpoints_(std::move(breakpoints)),
      slopes_(std::move(slopes)),
      subgradient_(breakpoint_subgradient) {
  require(slopes_.size() == breakpoints_.size() + 1, "need one more slope than breakpoints");
  require(std::is_sorted(breakpoints_.begin(), breakpoints_.end()) &&
              std::adjacent_find(breakpoints_.begin(), breakpoints_.end()) == breakpoints_.end(),
          "breakpoints must be strictly increasing");
  for (double s : slopes_) require(std::isfinite(s), "slopes must be finite");

  knot_values_.assign(breakpoints_.size(), 0.0);
  for (std::size_t b = 1; b < breakpoints_.size(); ++b)
    knot_values_[b] = knot_values_[b - 1] + slopes_[b] * (breakpoints_[b] - breakpoints_[b - 1]);
  // Shift so that V(0) = value_at_zero.
  const double shift = value_at_zero - value(0.0);
  for (double& v : knot_values_) v += shift;

  if (normalizable()) {
    masses_.resize(slopes_.size());
    for (std::size_t k = 0; k < slopes_.size(); ++k) masses_[k] = piece_mass(k);
    total_mass_ = 0.0;
    for (double m : masses_) total_mass_ += m;
  }
}

PiecewiseAffine1D PiecewiseAffine1D::laplace() { return PiecewiseAffine1D({0.0}, {-1.0, 1.0}); }

bool PiecewiseAffine1D::normalizable() const {
  if (breakpoints_.empty()) return false;
  return slopes_.front() < 0.0 && slopes_.back() > 0.0;
}

double PiecewiseAffine1D::value(double x) const {
  if (breakpoints_.empty()) return slopes_[0] * x;
  const std::size_t k =
      static_cast<std::size_t>(std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x) -
                               breakpoints_.begin());
  if (k == 0) return knot_values_[0] + slopes_[0] * (x - breakpoints_[0]);
  return knot_values_[k - 1] + slopes_[k] * (x - breakpoints_[k - 1]);
}

double PiecewiseAffine1D::derivative(double x) const {
  auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), x);
  if (it != breakpoints_.end() && *it == x) return subgradient_;
  return slopes_[static_cast<std::size_t>(it - breakpoints_.begin())];
}

double PiecewiseAffine1D::piece_mass(std::size_t k) const {
  const std::size_t nb = breakpoints_.size();
  if (k == 0) return std::exp(-knot_values_[0]) / (-slopes_[0]);
  if (k == nb) return std::exp(-knot_values_[nb - 1]) / slopes_[nb];
  const double w = breakpoints_[k] - breakpoints_[k - 1];
  const double s = slopes_[k];
  const double base = std::exp(-knot_values_[k - 1]);
  if (s == 0.0) return base * w;
  return base * (-std::expm1(-s * w)) / s;
}

double PiecewiseAffine1D::cdf(double x) const {
  require(normalizable(), "cdf: density is not normalizable");
  const std::size_t nb = breakpoints_.size();
  double acc = 0.0;
  for (std::size_t k = 0; k <= nb; ++k) {
    const double left = k == 0 ? -INFINITY : breakpoints_[k - 1];
    const double right = k == nb ? INFINITY : breakpoints_[k];
    if (x >= right) {
      acc += masses_[k];
      continue;
    }
    if (x > left) {
      const double s = slopes_[k];
      if (k == 0) {
        acc += std::exp(-value(x)) / (-s);
      } else if (s == 0.0) {
        acc += std::exp(-knot_values_[k - 1]) * (x - left);
      } else {
        acc += std::exp(-knot_values_[k - 1]) * (-std::expm1(-s * (x - left))) / s;
      }
    }
    break;
  }
  return std::clamp(acc / total_mass_, 0.0, 1.0);
}

double PiecewiseAffine1D::sample(std::mt19937_64& rng) const {
  require(normalizable(), "sample: density is not normalizable");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng) * total_mass_;
  const std::size_t nb = breakpoints_.size();
  std::size_t k = 0;
  while (k < nb && u >= masses_[k]) {
    u -= masses_[k];
    ++k;
  }
  k = std::min(k, nb);
  const double s = slopes_[k];
  if (k == 0) {
    // mass of (-inf, x] is exp(-V(x)) / (-s)
    const double target = std::max(u, 1e-300) * (-s);
    return breakpoints_[0] - (std::log(target) + knot_values_[0]) / s;
  }
  const double left = breakpoints_[k - 1];
  const double vl = knot_values_[k - 1];
  if (k == nb) {
    // mass of [left, x] is exp(-vl) (1 - exp(-s (x - left))) / s
    const double frac = std::min(u * s * std::exp(vl), 1.0 - 1e-16);
    return left - std::log1p(-frac) / s;
  }
  if (s == 0.0) return left + u * std::exp(vl);
  const double frac = u * s * std::exp(vl);
  return std::min(left - std::log1p(-frac) / s, breakpoints_[k]);
}

double StandardNormal1D::sample(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  return normal(rng);
}

double StandardNormal1D::cdf(double x) const { return standard_normal_cdf(x); }

ProductPotential::ProductPotential(PiecewiseAffine1D component, std::size_t dim)
    : component_(std::move(component)), dim_(dim) {
  require(dim >= 1, "ProductPotential: dim must be >= 1");
}

double ProductPotential::value(ConstSpan q) const {
  require(q.size() == dim_, "ProductPotential: dimension mismatch");
  double v = 0.0;
  for (double x : q) v += component_.value(x);
  return v;
}

double ProductPotential::value_and_gradient(ConstSpan q, MutSpan grad) const {
  require(q.size() == dim_ && grad.size() == dim_, "ProductPotential: dimension mismatch");
  double v = 0.0;
  for (std::size_t k = 0; k < dim_; ++k) {
    v += component_.value(q[k]);
    grad[k] = component_.derivative(q[k]);
  }
  return v;
}

void ProductPotential::surface_values(ConstSpan q, MutSpan out) const {
  const auto& bps = component_.breakpoints();
  for (std::size_t k = 0; k < dim_; ++k)
    for (std::size_t b = 0; b < bps.size(); ++b) out[k * bps.size() + b] = q[k] - bps[b];
}

double ProductPotential::surface_value(ConstSpan q, std::size_t surface) const {
  const auto& bps = component_.breakpoints();
  require(surface < surface_count(), "surface index out of range");
  return q[surface / bps.size()] - bps[surface % bps.size()];
}

void ProductPotential::one_sided_gradients(ConstSpan z, std::size_t surface, int sign_before,
                                           int sign_after, MutSpan before, MutSpan after) const {
  const std::size_t nb = component_.breakpoints().size();
  require(surface < surface_count(), "surface index out of range");
  const std::size_t k = surface / nb, b = surface % nb;
  value_and_gradient(z, before);
  std::copy(before.begin(), before.end(), after.begin());
  auto side = [&](int sign) {
    if (sign > 0) return component_.slope_right(b);
    if (sign < 0) return component_.slope_left(b);
    return component_.derivative(component_.breakpoints()[b]);
  };
  before[k] = side(sign_before);
  after[k] = side(sign_after);
}

std::string ProductPotential::describe_surface(std::size_t surface) const {
  const std::size_t nb = component_.breakpoints().size();
  return "{\"kind\":\"breakpoint\",\"coordinate\":" + std::to_string(surface / nb) +
         ",\"breakpoint\":" + std::to_string(surface % nb) + "}";
}

double QuadraticPotential::value(ConstSpan q) const {
  return 0.5 * squared_norm(q) / (scale_ * scale_);
}

double QuadraticPotential::value_and_gradient(ConstSpan q, MutSpan grad) const {
  const double inv = 1.0 / (scale_ * scale_);
  for (std::size_t k = 0; k < q.size(); ++k) grad[k] = q[k] * inv;
  return value(q);
}

double FlatPotential::value_and_gradient(ConstSpan, MutSpan grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  return 0.0;
}

}  // namespace ndhmc
