#pragma once

#include <cmath>

#include "egodepth/se3.hpp"

namespace egodepth {

// Points with z at or below this are treated as behind the camera.
inline constexpr double kMinPointZ = 1e-6;

/// Pixel coordinates (u, v) = (column, row). Integer values are pixel centers;
/// (0, 0) is the center of the top-left pixel.
struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy) ||
        !std::isfinite(cx) || !std::isfinite(cy))
      throw InvalidArgument("camera intrinsics require finite fx > 0, fy > 0");
  }

  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  /// Intrinsics of a 2x area-averaged image. Pixel centers move with the
  /// block average, so c' = (c + 0.5) / 2 - 0.5.
  CameraIntrinsics half_resolution() const {
    return {0.5 * fx, 0.5 * fy, 0.5 * (cx + 0.5) - 0.5, 0.5 * (cy + 0.5) - 0.5};
  }
};

inline Vec3 backproject(const Pixel& p, double depth, const CameraIntrinsics& k) {
  if (!(depth > 0.0) || !std::isfinite(depth))
    throw InvalidArgument("backproject: depth must be positive and finite");
  return {depth * (p.u - k.cx) / k.fx, depth * (p.v - k.cy) / k.fy, depth};
}

inline Pixel project(const Vec3& point, const CameraIntrinsics& k) {
  if (!(point.z() > kMinPointZ)) throw BehindCamera("project: point is behind the camera");
  return {k.fx * point.x() / point.z() + k.cx, k.fy * point.y() / point.z() + k.cy};
}

/// Maps a target pixel with known depth into the source view: K T D K^-1 p.
inline Pixel reproject(const Pixel& p_t, double depth, const SE3Transform& t,
                       const CameraIntrinsics& k) {
  return project(t * backproject(p_t, depth, k), k);
}

struct ReprojectionJacobian {
  Vec2 d_depth = Vec2::Zero();
  Eigen::Matrix<double, 2, 6> d_pose = Eigen::Matrix<double, 2, 6>::Zero();
};

/// Derivatives of reproject() with respect to the depth and to a pose
/// increment (see apply_increment: left rotation, additive translation).
inline ReprojectionJacobian reproject_jacobian(const Pixel& p_t, double depth,
                                               const SE3Transform& t,
                                               const CameraIntrinsics& k) {
  const Vec3 ray((p_t.u - k.cx) / k.fx, (p_t.v - k.cy) / k.fy, 1.0);
  const Vec3 rotated = t.rotation() * backproject(p_t, depth, k);
  const Vec3 q = rotated + t.translation();
  if (!(q.z() > kMinPointZ)) throw BehindCamera("reproject_jacobian: point is behind the camera");

  const double iz = 1.0 / q.z();
  Eigen::Matrix<double, 2, 3> d_proj;
  d_proj << k.fx * iz, 0.0, -k.fx * q.x() * iz * iz,
            0.0, k.fy * iz, -k.fy * q.y() * iz * iz;

  ReprojectionJacobian j;
  j.d_depth = d_proj * (t.rotation() * ray);
  j.d_pose.leftCols<3>() = -d_proj * hat(rotated);
  j.d_pose.rightCols<3>() = d_proj;
  return j;
}

}  // namespace egodepth
