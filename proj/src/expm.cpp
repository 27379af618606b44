#include "driftscape/expm.hpp"

#include <cmath>

namespace driftscape {

namespace {

// Pade(6,6) coefficients c_j = c_{j-1} * (7-j) / (j * (13-j)).
constexpr double kC[7] = {1.0,
                          1.0 / 2.0,
                          5.0 / 44.0,
                          1.0 / 66.0,
                          1.0 / 792.0,
                          1.0 / 15840.0,
                          1.0 / 665280.0};

template <typename Mat>
int scaling_steps(const Mat& a, double target) {
  const double norm = a.template lpNorm<Eigen::Infinity>();
  int s = 0;
  double scaled = norm;
  while (scaled > target && s < 60) {
    scaled *= 0.5;
    ++s;
  }
  return s;
}

template <typename Mat>
Mat expm_impl(Mat a) {
  const int s = scaling_steps(a, 0.5);
  a *= std::ldexp(1.0, -s);

  const Mat a2 = a * a;
  const Mat a4 = a2 * a2;
  const Mat a6 = a4 * a2;
  const Mat u = a * (kC[1] * Mat::Identity() + kC[3] * a2 + kC[5] * a4);
  const Mat v = kC[0] * Mat::Identity() + kC[2] * a2 + kC[4] * a4 + kC[6] * a6;

  Mat r = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < s; ++i) r = r * r;
  return r;
}

// Truncated Taylor series of phi1; valid once the argument is scaled small.
template <typename Mat>
Mat phi1_series(const Mat& a) {
  Mat term = Mat::Identity();
  Mat sum = term;
  for (int k = 2; k <= 14; ++k) {
    term = term * a / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

template <typename Mat>
Mat phi1_impl(Mat a) {
  const int s = scaling_steps(a, 0.25);
  a *= std::ldexp(1.0, -s);

  Mat phi = phi1_series(a);
  Mat e = expm_impl(a);
  for (int i = 0; i < s; ++i) {
    phi = 0.5 * (e + Mat::Identity()) * phi;
    e = e * e;
  }
  return phi;
}

}  // namespace

Mat2 expm(const Mat2& a) { return expm_impl<Mat2>(a); }
Mat4 expm(const Mat4& a) { return expm_impl<Mat4>(a); }
Mat2 expm_phi1(const Mat2& a) { return phi1_impl<Mat2>(a); }
Mat4 expm_phi1(const Mat4& a) { return phi1_impl<Mat4>(a); }

}  // namespace driftscape
