#include "so3ae/rotation.hpp"

#include <cmath>
#include <sstream>

namespace so3ae {

Rotation::Rotation(const Eigen::Matrix3d& m) : m_(m) {
  const double ortho =
      (m.transpose() * m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  const double det = m.determinant();
  if (ortho > 1e-12 || std::abs(det - 1.0) > 1e-12) {
    std::ostringstream os;
    os << "matrix is not a proper rotation (|R^T R - I|_max = " << ortho
       << ", det = " << det << ")";
    fail(ErrorKind::InvalidArgument, os.str());
  }
}

Rotation Rotation::euler_zyz(double alpha, double beta, double gamma) {
  const Eigen::Matrix3d m =
      (Eigen::AngleAxisd(alpha, Eigen::Vector3d::UnitZ()) *
       Eigen::AngleAxisd(beta, Eigen::Vector3d::UnitY()) *
       Eigen::AngleAxisd(gamma, Eigen::Vector3d::UnitZ()))
          .toRotationMatrix();
  Rotation r;
  r.m_ = m;
  return r;
}

Rotation Rotation::axis_angle(const Eigen::Vector3d& axis, double angle) {
  const double n = axis.norm();
  if (n < 1e-300) fail(ErrorKind::InvalidArgument, "axis_angle: zero axis");
  Rotation r;
  r.m_ = Eigen::AngleAxisd(angle, axis / n).toRotationMatrix();
  return r;
}

Rotation Rotation::inverse() const {
  Rotation r;
  r.m_ = m_.transpose();
  return r;
}

void Rotation::to_euler_zyz(double& alpha, double& beta, double& gamma) const {
  // R = Rz(a) Ry(b) Rz(g); R(2,2) = cos b, R(0,2) = sin b cos a,
  // R(1,2) = sin b sin a, R(2,0) = -sin b cos g, R(2,1) = sin b sin g.
  // sin b is recovered by hypot rather than acos, which keeps beta fully
  // accurate near the poles. Within ~1e-9 of a pole the (a, g) split is
  // intrinsically ill-conditioned and the z-angle is folded into alpha;
  // the reconstructed matrix is then accurate to ~1e-8, which every
  // consumer tolerance in this library comfortably absorbs.
  const double c = m_(2, 2);
  const double sb = std::hypot(m_(0, 2), m_(1, 2));
  beta = std::atan2(sb, c);
  if (sb > 1e-9) {
    alpha = std::atan2(m_(1, 2), m_(0, 2));
    gamma = std::atan2(m_(2, 1), -m_(2, 0));
  } else if (c > 0.0) {
    // beta ~ 0: R = Rz(a+g); attribute everything to alpha.
    gamma = 0.0;
    alpha = std::atan2(m_(1, 0), m_(0, 0));
  } else {
    // beta ~ pi: R = Rz(a) Ry(pi) Rz(g) depends on a-g only.
    gamma = 0.0;
    alpha = std::atan2(-m_(1, 0), -m_(0, 0));
  }
}

Rotation Frame::as_rotation() const {
  Eigen::Matrix3d m;
  m.col(0) = e1;
  m.col(1) = e2;
  m.col(2) = e3;
  return Rotation(m);
}

Frame gram_schmidt_frame(const Eigen::Vector3d& v1, const Eigen::Vector3d& v2,
                         double eps) {
  const double n1 = v1.norm();
  if (n1 < eps)
    fail(ErrorKind::DegenerateFrame,
         "gram_schmidt_frame: first vector has near-zero norm");
  Frame f;
  f.e1 = v1 / n1;
  Eigen::Vector3d u2 = v2 - f.e1.dot(v2) * f.e1;
  const double n2 = u2.norm();
  if (n2 < eps)
    fail(ErrorKind::DegenerateFrame,
         "gram_schmidt_frame: second vector is near-collinear with the first");
  f.e2 = u2 / n2;
  f.e3 = f.e1.cross(f.e2);
  return f;
}

}  // namespace so3ae
