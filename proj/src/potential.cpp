#include "driftscape/potential.hpp"

#include <cmath>

#include "driftscape/errors.hpp"

namespace driftscape {

namespace {

constexpr double kWeightSumTol = 1e-12;
constexpr double kMinEigenvalue = 1e-10;

double component_exp(const GaussianComponent& c, const Vec2& x) {
  const Vec2 d = x - c.center;
  return std::exp(-0.5 * d.dot(c.information * d));
}

}  // namespace

std::array<double, 2> symmetric_eigenvalues(const Mat2& s) {
  const double half_trace = 0.5 * (s(0, 0) + s(1, 1));
  const double half_gap = 0.5 * (s(0, 0) - s(1, 1));
  const double radius = std::hypot(half_gap, s(0, 1));
  return {half_trace - radius, half_trace + radius};
}

MixturePotential::MixturePotential(std::vector<GaussianComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) {
    throw InvalidParameter("mixture needs at least one component");
  }
  double total = 0.0;
  for (auto& c : components_) {
    if (!(c.weight > 0.0) || !std::isfinite(c.weight)) {
      throw InvalidParameter("component weight must be positive and finite");
    }
    if (!c.center.allFinite() || !c.information.allFinite()) {
      throw InvalidParameter("component center/information must be finite");
    }
    const double asym = std::abs(c.information(0, 1) - c.information(1, 0));
    const double scale = c.information.cwiseAbs().maxCoeff();
    if (asym > 1e-9 * (1.0 + scale)) {
      throw InvalidParameter("information matrix must be symmetric");
    }
    const double off = 0.5 * (c.information(0, 1) + c.information(1, 0));
    c.information(0, 1) = off;
    c.information(1, 0) = off;
    if (symmetric_eigenvalues(c.information)[0] <= kMinEigenvalue) {
      throw InvalidParameter("information matrix must be positive definite");
    }
    total += c.weight;
  }
  for (auto& c : components_) c.weight /= total;
  double renormalized = 0.0;
  for (const auto& c : components_) renormalized += c.weight;
  if (std::abs(renormalized - 1.0) > kWeightSumTol) {
    throw InvalidParameter("weights could not be normalized");
  }
}

ModelParams::ModelParams(MixturePotential potential, double gamma)
    : potential_(std::move(potential)), gamma_(gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw InvalidParameter("gamma must be positive and finite");
  }
}

double potential_value(const MixturePotential& p, const Vec2& x) {
  double value = 0.0;
  for (const auto& c : p.components()) value += c.weight * component_exp(c, x);
  return value;
}

Vec2 drift(const MixturePotential& p, const Vec2& x) {
  Vec2 g = Vec2::Zero();
  for (const auto& c : p.components()) {
    const Vec2 d = x - c.center;
    const Vec2 cd = c.information * d;
    g -= c.weight * std::exp(-0.5 * d.dot(cd)) * cd;
  }
  return g;
}

Mat2 drift_jacobian(const MixturePotential& p, const Vec2& x) {
  Mat2 h = Mat2::Zero();
  for (const auto& c : p.components()) {
    const Vec2 d = x - c.center;
    const Vec2 cd = c.information * d;
    const double e = c.weight * std::exp(-0.5 * d.dot(cd));
    h += e * (cd * cd.transpose() - c.information);
  }
  // cd * cd' is symmetric up to rounding; rebalance so callers can rely
  // on exact symmetry.
  const double off = 0.5 * (h(0, 1) + h(1, 0));
  h(0, 1) = off;
  h(1, 0) = off;
  return h;
}

void drift_and_jacobian(const MixturePotential& p, const Vec2& x, Vec2& f,
                        Mat2& j) {
  f.setZero();
  j.setZero();
  for (const auto& c : p.components()) {
    const Vec2 d = x - c.center;
    const Vec2 cd = c.information * d;
    const double e = c.weight * std::exp(-0.5 * d.dot(cd));
    f -= e * cd;
    j += e * (cd * cd.transpose() - c.information);
  }
  const double off = 0.5 * (j(0, 1) + j(1, 0));
  j(0, 1) = off;
  j(1, 0) = off;
}

Vec2 lamperti_drift(const ModelParams& theta, const Vec2& y) {
  return drift(theta.potential(), theta.gamma() * y) / theta.gamma();
}

double h_value(const ModelParams& theta, const Vec2& y) {
  // antiderivative of the Lamperti drift: grad of P(gamma y) / gamma^2
  // is exactly gamma^{-1} (grad P)(gamma y)
  const double g = theta.gamma();
  return potential_value(theta.potential(), g * y) / (g * g);
}

double laplacian_h(const ModelParams& theta, const Vec2& y) {
  return drift_jacobian(theta.potential(), theta.gamma() * y).trace();
}

EaBounds ea_bounds(const ModelParams& theta) {
  const double inv_e = std::exp(-1.0);
  double pi_bar = 0.0;
  double weighted_max_eig = 0.0;
  double weighted_trace = 0.0;
  for (const auto& c : theta.potential().components()) {
    pi_bar += c.weight;
    weighted_max_eig += c.weight * symmetric_eigenvalues(c.information)[1];
    weighted_trace += c.weight * c.information.trace();
  }
  EaBounds b;
  b.alpha_sq_upper =
      inv_e * pi_bar * weighted_max_eig / (theta.gamma() * theta.gamma());
  b.lap_lower = -weighted_trace;
  b.lap_upper = 2.0 * inv_e * weighted_max_eig;
  b.m = b.lap_lower;
  b.M = b.alpha_sq_upper + b.lap_upper;
  b.rate = 0.5 * (b.M - b.m);
  return b;
}

double phi(const ModelParams& theta, const EaBounds& bounds, const Vec2& y) {
  const Vec2 a = lamperti_drift(theta, y);
  return 0.5 * (a.squaredNorm() + laplacian_h(theta, y) - bounds.m);
}

}  // namespace driftscape
