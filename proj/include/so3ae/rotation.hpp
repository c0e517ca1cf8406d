#pragma once

#include <Eigen/Dense>

#include "so3ae/errors.hpp"

namespace so3ae {

// Proper rotation in 3-space. The wrapped matrix is validated on construction:
// R^T R = I and det R = +1, both to 1e-12 in the max norm. All angles are in
// radians; Euler angles follow the active z-y-z convention, i.e.
// euler_zyz(a,b,g) = Rz(a) * Ry(b) * Rz(g).
class Rotation {
 public:
  Rotation() : m_(Eigen::Matrix3d::Identity()) {}
  explicit Rotation(const Eigen::Matrix3d& m);

  static Rotation identity() { return Rotation(); }
  static Rotation euler_zyz(double alpha, double beta, double gamma);
  static Rotation axis_angle(const Eigen::Vector3d& axis, double angle);

  const Eigen::Matrix3d& matrix() const { return m_; }
  Rotation inverse() const;

  // Recovers z-y-z Euler angles (alpha, beta, gamma) with beta in [0, pi].
  // At the gimbal-locked poles (beta ~ 0 or pi) gamma is fixed to 0 and the
  // full z-angle is folded into alpha.
  void to_euler_zyz(double& alpha, double& beta, double& gamma) const;

  friend Rotation operator*(const Rotation& a, const Rotation& b) {
    Rotation r;
    r.m_ = a.m_ * b.m_;
    return r;
  }

 private:
  Eigen::Matrix3d m_;
};

// Right-handed orthonormal frame. e3 = e1 x e2 always holds for frames built
// by gram_schmidt_frame.
struct Frame {
  Eigen::Vector3d e1, e2, e3;

  static Frame identity() {
    return Frame{Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(),
                 Eigen::Vector3d::UnitZ()};
  }

  // The rotation with columns (e1, e2, e3): it maps the canonical axes onto
  // the frame vectors, so frames compose with rotations from the left
  // (rotating the underlying data by R turns F into R*F).
  Rotation as_rotation() const;
};

// Orthonormalizes two vectors into a right-handed frame:
//   e1 = v1/|v1|,  e2 = normalize(v2 - (e1.v2) e1),  e3 = e1 x e2.
// Degenerate inputs (|v1| < eps, or v2 within eps of the span of v1 after
// projection) raise a degenerate-frame error.
Frame gram_schmidt_frame(const Eigen::Vector3d& v1, const Eigen::Vector3d& v2,
                         double eps = 1e-8);

}  // namespace so3ae
