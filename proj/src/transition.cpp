#include "driftscape/transition.hpp"

#include <cmath>
#include <numbers>

#include "driftscape/errors.hpp"
#include "driftscape/expm.hpp"

namespace driftscape {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kDetTolerance = 1e-12;

bool jacobian_is_singular(const Mat2& j) {
  const double det = j(0, 0) * j(1, 1) - j(0, 1) * j(1, 0);
  return std::abs(det) < kDetTolerance * std::max(1.0, j.squaredNorm());
}

// Kronecker sum J (+) J = J (x) I + I (x) J, for column-major vec().
Mat4 kronecker_sum(const Mat2& j) {
  Mat4 k = Mat4::Zero();
  for (int c = 0; c < 2; ++c) {
    for (int r = 0; r < 2; ++r) {
      k.block<2, 2>(2 * r, 2 * c) = (r == c) ? Mat2(j + j(r, c) * Mat2::Identity())
                                             : Mat2(j(r, c) * Mat2::Identity());
    }
  }
  return k;
}

// (e^{xt} - 1) / x with the removable singularity handled.
double expm1_over(double x, double t) {
  const double xt = x * t;
  if (std::abs(xt) < 1e-8) return t * (1.0 + 0.5 * xt);
  return std::expm1(xt) / x;
}

struct SymmetricEigen {
  double lam1, lam2;  // ascending
  Vec2 v1, v2;        // orthonormal eigenvectors
};

SymmetricEigen decompose_symmetric(const Mat2& s) {
  SymmetricEigen e;
  const auto lam = symmetric_eigenvalues(s);
  e.lam1 = lam[0];
  e.lam2 = lam[1];
  const double b = s(0, 1);
  if (std::abs(b) < 1e-300 * std::max(1.0, s.cwiseAbs().maxCoeff())) {
    const bool ascending = s(0, 0) <= s(1, 1);
    e.v1 = ascending ? Vec2(1, 0) : Vec2(0, 1);
    e.v2 = ascending ? Vec2(0, 1) : Vec2(1, 0);
    return e;
  }
  e.v1 = Vec2(b, e.lam1 - s(0, 0)).normalized();
  e.v2 = Vec2(-e.v1.y(), e.v1.x());
  return e;
}

}  // namespace

GaussianTransition euler_transition(const DriftField& f, const Vec2& x,
                                    double dt, double gamma) {
  GaussianTransition t;
  t.mean = x + dt * f.value(x);
  t.cov = gamma * gamma * dt * Mat2::Identity();
  t.psd = true;
  return t;
}

GaussianTransition ozaki_transition(const DriftField& f, const Vec2& x,
                                    double dt, double gamma) {
  const Mat2 j = f.jacobian(x);
  if (jacobian_is_singular(j)) {
    throw SingularJacobian("drift Jacobian numerically singular");
  }

  GaussianTransition t;
  const Mat2 ejdt = expm(Mat2(j * dt));
  t.mean = x + (ejdt - Mat2::Identity()) * j.partialPivLu().solve(f.value(x));

  const Mat4 k = kronecker_sum(j);
  const Vec4 vec_noise = gamma * gamma * Vec4(1.0, 0.0, 0.0, 1.0);
  const double det_k = k.determinant();
  Vec4 vec_cov;
  if (std::abs(det_k) >
      kDetTolerance * std::max(1.0, k.squaredNorm() * k.squaredNorm())) {
    const Mat4 ekdt = expm(Mat4(k * dt));
    vec_cov = k.partialPivLu().solve((ekdt - Mat4::Identity()) * vec_noise);
  } else {
    // The Kronecker sum is singular whenever tr J vanishes even though J
    // itself is invertible; evaluate (e^{K dt} - I) K^{-1} through phi1.
    vec_cov = dt * (expm_phi1(Mat4(k * dt)) * vec_noise);
  }
  Mat2 cov;
  cov << vec_cov(0), vec_cov(2), vec_cov(1), vec_cov(3);
  t.cov = 0.5 * (cov + cov.transpose());
  t.psd = true;
  return t;
}

GaussianTransition kessler_transition(const DriftField& f, const Vec2& x,
                                      double dt, double gamma) {
  const Mat2 j = f.jacobian(x);
  GaussianTransition t;
  t.mean = x + dt * f.value(x);
  Mat2 cov = gamma * gamma * dt * (Mat2::Identity() + dt * j);
  t.cov = 0.5 * (cov + cov.transpose());
  t.psd = symmetric_eigenvalues(t.cov)[0] >= 0.0;
  return t;
}

double gaussian_logpdf(const GaussianTransition& t, const Vec2& y) {
  if (!t.psd) throw NonPsdCovariance("covariance flagged non-PSD");
  const double det = t.cov(0, 0) * t.cov(1, 1) - t.cov(0, 1) * t.cov(1, 0);
  if (!(det > 0.0)) throw NonPsdCovariance("covariance singular");
  const Vec2 r = y - t.mean;
  const double quad = (t.cov(1, 1) * r.x() * r.x() -
                       2.0 * t.cov(0, 1) * r.x() * r.y() +
                       t.cov(0, 0) * r.y() * r.y()) /
                      det;
  return -kLog2Pi - 0.5 * std::log(det) - 0.5 * quad;
}

namespace {

double euler_term(const Vec2& fx, const Segment& s, double gamma_sq) {
  const double v = gamma_sq * s.dt;
  const Vec2 r = s.end - s.start - s.dt * fx;
  return -kLog2Pi - std::log(v) - 0.5 * r.squaredNorm() / v;
}

// Ozaki term specialized to symmetric Jacobians (always the case for
// gradient drifts): eigen-decomposition replaces the 4x4 exponential.
// Matches gaussian_logpdf(ozaki_transition(...)) to rounding error.
double ozaki_term_symmetric(const Vec2& fx, const Mat2& j, const Segment& s,
                            double gamma_sq, bool& fell_back) {
  if (jacobian_is_singular(j)) {
    fell_back = true;
    return euler_term(fx, s, gamma_sq);
  }
  const SymmetricEigen e = decompose_symmetric(j);
  const double f1 = e.v1.dot(fx);
  const double f2 = e.v2.dot(fx);
  // mean offset = (e^{J dt} - I) J^{-1} f, coordinate-wise in the eigenbasis
  const double m1 = expm1_over(e.lam1, s.dt) * f1;
  const double m2 = expm1_over(e.lam2, s.dt) * f2;
  const double var1 = gamma_sq * expm1_over(2.0 * e.lam1, s.dt);
  const double var2 = gamma_sq * expm1_over(2.0 * e.lam2, s.dt);
  const Vec2 r = s.end - s.start - m1 * e.v1 - m2 * e.v2;
  const double z1 = e.v1.dot(r);
  const double z2 = e.v2.dot(r);
  return -kLog2Pi - 0.5 * (std::log(var1) + std::log(var2)) -
         0.5 * (z1 * z1 / var1 + z2 * z2 / var2);
}

// Stabilized Kessler term. The segment is dropped when dt * J has an
// eigenvalue outside [-1, 1]: below -1 the covariance loses positive
// semi-definiteness, above +1 the expanded precision does, and the
// truncated contrast stops being a density expansion either way.
double kessler_term(const Vec2& fx, const Mat2& j, const Segment& s,
                    double gamma_sq, bool& skipped) {
  const auto lam = symmetric_eigenvalues(j);
  if (s.dt * lam[0] < -1.0 || s.dt * lam[1] > 1.0) {
    skipped = true;
    return 0.0;
  }
  const double v = gamma_sq * s.dt;
  const Vec2 r = s.end - s.start - s.dt * fx;
  const double quad = (r.squaredNorm() - s.dt * r.dot(j * r)) / v;
  return -kLog2Pi - std::log(v) - 0.5 * s.dt * j.trace() - 0.5 * quad;
}

}  // namespace

namespace {

Contrast contrast_impl(Scheme method, const ModelParams& theta,
                       const TrajectorySet& data, bool kessler_substitute,
                       double baseline_gamma_sq) {
  data.validate();
  const MixturePotential& p = theta.potential();
  const double gamma_sq = theta.gamma() * theta.gamma();

  Contrast c;
  Vec2 fx;
  Mat2 jx;
  for (const auto& track : data.tracks) {
    for (std::size_t i = 0; i + 1 < track.times.size(); ++i) {
      const Segment s{track.points[i], track.points[i + 1],
                      track.times[i + 1] - track.times[i]};
      double term = 0.0;
      bool dropped = false;
      switch (method) {
        case Scheme::euler:
          term = euler_term(drift(p, s.start), s, gamma_sq);
          break;
        case Scheme::ozaki: {
          drift_and_jacobian(p, s.start, fx, jx);
          bool fell_back = false;
          term = ozaki_term_symmetric(fx, jx, s, gamma_sq, fell_back);
          if (fell_back) ++c.skipped;
          break;
        }
        case Scheme::kessler: {
          drift_and_jacobian(p, s.start, fx, jx);
          bool skip = false;
          term = kessler_term(fx, jx, s, gamma_sq, skip);
          if (skip) {
            ++c.skipped;
            if (kessler_substitute) {
              // reference value: zero-drift Brownian density at the
              // quadratic-variation level
              const double v = baseline_gamma_sq * s.dt;
              term = -kLog2Pi - std::log(v) -
                     0.5 * (s.end - s.start).squaredNorm() / v;
            } else {
              dropped = true;
            }
          }
          break;
        }
      }
      ++c.total;
      if (dropped) continue;
      if (!std::isfinite(term)) {
        throw NonFiniteValue("non-finite contrast term");
      }
      c.value += term;
    }
  }
  if (method == Scheme::kessler && !kessler_substitute &&
      c.skipped == c.total) {
    c.value = 0.0;
  }
  return c;
}

}  // namespace

Contrast pseudo_loglik(Scheme method, const ModelParams& theta,
                       const TrajectorySet& data) {
  return contrast_impl(method, theta, data, false, 0.0);
}

Contrast kessler_fit_contrast(const ModelParams& theta,
                              const TrajectorySet& data,
                              double baseline_gamma_sq) {
  return contrast_impl(Scheme::kessler, theta, data, true, baseline_gamma_sq);
}

}  // namespace driftscape
