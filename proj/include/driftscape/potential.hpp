#ifndef DRIFTSCAPE_POTENTIAL_HPP
#define DRIFTSCAPE_POTENTIAL_HPP

#include <array>
#include <vector>

#include "driftscape/types.hpp"

namespace driftscape {

/// One attractive zone: a weighted Gaussian-shaped bump with center mu and
/// symmetric positive definite information matrix C (inverse squared length).
struct GaussianComponent {
  double weight = 1.0;
  Vec2 center = Vec2::Zero();
  Mat2 information = Mat2::Identity();
};

/// Mixture of K Gaussian-shaped components. Weights are normalized to sum
/// to one at construction; information matrices are validated (symmetric,
/// eigenvalues > 1e-10) and stored exactly symmetric.
class MixturePotential {
 public:
  explicit MixturePotential(std::vector<GaussianComponent> components);

  int size() const { return static_cast<int>(components_.size()); }
  const GaussianComponent& component(int k) const {
    return components_[static_cast<std::size_t>(k)];
  }
  const std::vector<GaussianComponent>& components() const {
    return components_;
  }

 private:
  std::vector<GaussianComponent> components_;
};

/// Full model parameter theta = (eta, gamma): mixture potential plus the
/// scalar diffusion coefficient gamma > 0.
class ModelParams {
 public:
  ModelParams(MixturePotential potential, double gamma);

  const MixturePotential& potential() const { return potential_; }
  double gamma() const { return gamma_; }

 private:
  MixturePotential potential_;
  double gamma_;
};

/// Constants bounding the Lamperti-transformed drift, used by the exact
/// rejection sampler: sup ||alpha||^2, bounds on the Laplacian of H, and
/// the Poisson proposal rate r = (M - m) / 2.
struct EaBounds {
  double alpha_sq_upper = 0.0;
  double lap_lower = 0.0;
  double lap_upper = 0.0;
  double m = 0.0;
  double M = 0.0;
  double rate = 0.0;
};

/// Eigenvalues of a symmetric 2x2 matrix in closed form, ascending order.
std::array<double, 2> symmetric_eigenvalues(const Mat2& s);

/// P(x) = sum_k pi_k exp(-(x-mu_k)' C_k (x-mu_k) / 2), in (0, 1].
double potential_value(const MixturePotential& p, const Vec2& x);

/// Gradient of the potential, the drift of the SDE.
Vec2 drift(const MixturePotential& p, const Vec2& x);

/// Hessian of the potential (Jacobian of the drift). Exactly symmetric.
Mat2 drift_jacobian(const MixturePotential& p, const Vec2& x);

/// Drift and its Jacobian in one pass (one exponential per component).
void drift_and_jacobian(const MixturePotential& p, const Vec2& x, Vec2& f,
                        Mat2& j);

/// Drift of the unit-diffusion process Y = X / gamma:
/// alpha(y) = drift(gamma y) / gamma.
Vec2 lamperti_drift(const ModelParams& theta, const Vec2& y);

/// Antiderivative of the Lamperti drift: H(y) = P(gamma y) / gamma^2,
/// with grad H = alpha. Values lie in [0, 1/gamma^2].
double h_value(const ModelParams& theta, const Vec2& y);

/// Laplacian of H, i.e. the trace of the Jacobian of alpha.
double laplacian_h(const ModelParams& theta, const Vec2& y);

/// Global bounds on ||alpha||^2 and the Laplacian of H for this theta.
EaBounds ea_bounds(const ModelParams& theta);

/// phi(y) = (||alpha(y)||^2 + lap H(y) - m) / 2, in [0, bounds.rate].
double phi(const ModelParams& theta, const EaBounds& bounds, const Vec2& y);

}  // namespace driftscape

#endif
