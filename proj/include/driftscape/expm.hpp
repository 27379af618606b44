#ifndef DRIFTSCAPE_EXPM_HPP
#define DRIFTSCAPE_EXPM_HPP

#include "driftscape/types.hpp"

namespace driftscape {

/// Matrix exponential by scaling-and-squaring with a Pade(6,6) approximant.
Mat2 expm(const Mat2& a);
Mat4 expm(const Mat4& a);

/// phi1(A) = sum_{k>=0} A^k / (k+1)!  (equals (e^A - I) A^{-1} when A is
/// invertible). Evaluated by a scaled Taylor series with the doubling rule
/// phi1(2A) = (e^A + I) phi1(A) / 2, so it stays accurate for singular A.
Mat2 expm_phi1(const Mat2& a);
Mat4 expm_phi1(const Mat4& a);

}  // namespace driftscape

#endif
