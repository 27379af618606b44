#ifndef DRIFTSCAPE_TYPES_HPP
#define DRIFTSCAPE_TYPES_HPP

#include <Eigen/Dense>

namespace driftscape {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

}  // namespace driftscape

#endif
