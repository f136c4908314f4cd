#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace semex {

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

/// A planar rigid-body pose (x, y, theta) with theta in (-pi, pi].
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose2() = default;
  Pose2(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}

  Eigen::Matrix2d rotation() const {
    const double c = std::cos(theta), s = std::sin(theta);
    Eigen::Matrix2d r;
    r << c, -s, s, c;
    return r;
  }

  Eigen::Vector2d translation() const { return {x, y}; }

  /// Composition: this * other (other expressed in this frame).
  Pose2 compose(const Pose2& o) const {
    const double c = std::cos(theta), s = std::sin(theta);
    return Pose2(x + c * o.x - s * o.y, y + s * o.x + c * o.y, theta + o.theta);
  }

  Pose2 inverse() const {
    const double c = std::cos(theta), s = std::sin(theta);
    return Pose2(-(c * x + s * y), -(-s * x + c * y), -theta);
  }

  /// Relative transform taking this frame to `o`: this^{-1} * o.
  Pose2 between(const Pose2& o) const { return inverse().compose(o); }

  /// Maps a point from this pose's frame into the world frame.
  Eigen::Vector2d transform(const Eigen::Vector2d& p) const {
    return rotation() * p + translation();
  }

  Eigen::Vector3d vec() const { return {x, y, theta}; }
};

inline Pose2 operator*(const Pose2& a, const Pose2& b) { return a.compose(b); }

/// SE(2) adjoint, Ad(T) = [[R, J t], [0, 1]] with J = [[0, 1], [-1, 0]].
/// Conjugates body-frame twists/covariances between frames; det(Ad) = 1.
inline Eigen::Matrix3d adjoint(const Pose2& t) {
  Eigen::Matrix3d ad = Eigen::Matrix3d::Identity();
  ad.topLeftCorner<2, 2>() = t.rotation();
  ad(0, 2) = t.y;
  ad(1, 2) = -t.x;
  return ad;
}

}  // namespace semex
