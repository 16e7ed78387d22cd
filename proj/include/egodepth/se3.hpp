#pragma once

#include <cmath>
#include <numbers>
#include <span>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "egodepth/error.hpp"

namespace egodepth {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Below this rotation angle the Rodrigues coefficients switch to their
// second-order Taylor expansions.
inline constexpr double kSmallAngle = 1e-8;
// log_so3 refuses angles this close to pi (the axis sign is ambiguous there).
inline constexpr double kLogPiGuard = 1e-6;
inline constexpr double kRotationTolerance = 1e-9;

inline Mat3 hat(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

inline bool all_finite(const auto& m) { return m.array().isFinite().all(); }

/// Element of SO(3). Construction from a raw matrix validates orthonormality
/// and det = +1 to within 1e-9.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}

  static Rotation from_matrix(const Mat3& m) {
    if (!all_finite(m)) throw InvalidArgument("rotation matrix has non-finite entries");
    if (((m.transpose() * m) - Mat3::Identity()).cwiseAbs().maxCoeff() > kRotationTolerance)
      throw InvalidArgument("rotation matrix is not orthonormal");
    if (std::abs(m.determinant() - 1.0) > kRotationTolerance)
      throw InvalidArgument("rotation matrix determinant is not +1");
    return Rotation(m);
  }

  const Mat3& matrix() const { return m_; }
  Rotation inverse() const { return Rotation(m_.transpose()); }
  Rotation operator*(const Rotation& o) const { return Rotation(m_ * o.m_); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

 private:
  explicit Rotation(const Mat3& m) : m_(m) {}
  friend Rotation exp_so3(const Vec3& rot);

  Mat3 m_;
};

/// Rodrigues map from an axis-angle vector (axis * radians) to SO(3).
inline Rotation exp_so3(const Vec3& rot) {
  if (!all_finite(rot)) throw InvalidArgument("exp_so3: non-finite axis-angle input");
  const double theta2 = rot.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a;  // sin(theta)/theta
  double b;  // (1 - cos(theta))/theta^2
  if (theta < kSmallAngle) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Mat3 k = hat(rot);
  return Rotation(Mat3::Identity() + a * k + b * (k * k));
}

/// Inverse of exp_so3 for angles in [0, pi). Throws AmbiguousLog within 1e-6 of pi.
inline Vec3 log_so3(const Rotation& r) {
  const Mat3& m = r.matrix();
  const Vec3 axis_sin(0.5 * (m(2, 1) - m(1, 2)), 0.5 * (m(0, 2) - m(2, 0)),
                      0.5 * (m(1, 0) - m(0, 1)));
  const double s = axis_sin.norm();
  const double c = 0.5 * (m.trace() - 1.0);
  const double theta = std::atan2(s, c);
  if (std::numbers::pi - theta < kLogPiGuard)
    throw AmbiguousLog("log_so3: rotation angle is within 1e-6 of pi");
  if (theta < kSmallAngle) return (1.0 + theta * theta / 6.0) * axis_sin;
  return (theta / s) * axis_sin;
}

/// Rigid-body transform x -> R x + t.
class SE3Transform {
 public:
  SE3Transform() : t_(Vec3::Zero()) {}
  SE3Transform(const Rotation& r, const Vec3& t) : r_(r), t_(t) {
    if (!all_finite(t)) throw InvalidArgument("SE3Transform: non-finite translation");
  }

  static SE3Transform identity() { return {}; }
  static SE3Transform translation(const Vec3& t) { return {Rotation(), t}; }

  static SE3Transform from_matrix(const Mat4& m) {
    if (m(3, 0) != 0.0 || m(3, 1) != 0.0 || m(3, 2) != 0.0 || m(3, 3) != 1.0)
      throw InvalidArgument("homogeneous transform bottom row must be (0,0,0,1)");
    return {Rotation::from_matrix(m.topLeftCorner<3, 3>()), m.topRightCorner<3, 1>()};
  }

  const Rotation& rotation() const { return r_; }
  const Vec3& translation() const { return t_; }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = r_.matrix();
    m.topRightCorner<3, 1>() = t_;
    return m;
  }

  Vec3 operator*(const Vec3& p) const { return r_ * p + t_; }

 private:
  Rotation r_;
  Vec3 t_;
};

inline SE3Transform compose(const SE3Transform& a, const SE3Transform& b) {
  return {a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation()};
}

inline SE3Transform inverse(const SE3Transform& a) {
  const Rotation rt = a.rotation().inverse();
  return {rt, -(rt * a.translation())};
}

inline SE3Transform operator*(const SE3Transform& a, const SE3Transform& b) { return compose(a, b); }

/// Six-parameter pose: axis-angle rotation followed by translation.
struct Pose6DoF {
  Vec3 rot = Vec3::Zero();
  Vec3 trans = Vec3::Zero();

  Vec6 vector() const {
    Vec6 v;
    v << rot, trans;
    return v;
  }
  static Pose6DoF from_vector(const Vec6& v) { return {v.head<3>(), v.tail<3>()}; }

  SE3Transform to_transform() const {
    if (rot.norm() >= std::numbers::pi) throw InvalidArgument("Pose6DoF: |rot| must be < pi");
    return {exp_so3(rot), trans};
  }
  static Pose6DoF from_transform(const SE3Transform& t) {
    return {log_so3(t.rotation()), t.translation()};
  }
};

// Local update used by every Jacobian in the library: rotation is perturbed
// on the left, exp(d_rot) * R, translation additively, t + d_trans.
inline SE3Transform apply_increment(const SE3Transform& t, const Vec6& delta) {
  return {exp_so3(delta.head<3>()) * t.rotation(), t.translation() + delta.tail<3>()};
}

struct PosePair {
  SE3Transform forward;
  SE3Transform backward;
};

namespace detail {

inline double l1_from_identity(const SE3Transform& t) {
  return (t.matrix() - Mat4::Identity()).cwiseAbs().sum();
}

inline double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Gradient of |A*C - I|_1 with respect to increments on A (left operand) and
// C (right operand).
inline void product_l1_gradient(const SE3Transform& a, const SE3Transform& c, Vec6& d_left,
                                Vec6& d_right) {
  const SE3Transform p = compose(a, c);
  const Mat3 sr = (p.rotation().matrix() - Mat3::Identity()).unaryExpr(&sign0);
  const Vec3 st = p.translation().unaryExpr(&sign0);
  const Mat3& ra = a.rotation().matrix();
  const Mat3& rc = c.rotation().matrix();
  d_left.setZero();
  d_right.setZero();
  for (int k = 0; k < 3; ++k) {
    const Mat3 ek = hat(Vec3::Unit(k));
    // Left: R = exp(w) Ra Rc, t = exp(w) Ra tc + ta + tau.
    d_left(k) = (sr.cwiseProduct(ek * p.rotation().matrix())).sum() +
                st.dot(ek * (ra * c.translation()));
    // Right: R = Ra exp(w) Rc, t = Ra (tc + tau) + ta.
    d_right(k) = (sr.cwiseProduct(ra * ek * rc)).sum();
  }
  d_left.tail<3>() = st;
  d_right.tail<3>() = ra.transpose() * st;
}

}  // namespace detail

/// Backward-forward consistency: for each pair, the elementwise L1 distance
/// of the 4x4 products backward*forward and forward*backward from I,
/// averaged over the two orderings, summed over pairs.
inline double bf_consistency_loss(std::span<const PosePair> pairs) {
  if (pairs.empty()) throw InvalidArgument("bf_consistency_loss: empty pair list");
  double total = 0.0;
  for (const auto& p : pairs) {
    total += 0.5 * (detail::l1_from_identity(compose(p.backward, p.forward)) +
                    detail::l1_from_identity(compose(p.forward, p.backward)));
  }
  return total;
}

struct PosePairGradient {
  Vec6 d_forward = Vec6::Zero();
  Vec6 d_backward = Vec6::Zero();
};

/// Sub-gradient of one pair's term of bf_consistency_loss (sign(0) = 0).
inline PosePairGradient bf_consistency_gradient(const PosePair& p) {
  Vec6 bl, fr, fl, br;
  detail::product_l1_gradient(p.backward, p.forward, bl, fr);
  detail::product_l1_gradient(p.forward, p.backward, fl, br);
  return {0.5 * (fr + fl), 0.5 * (bl + br)};
}

}  // namespace egodepth
