#include "so3ae/spherical.hpp"

#include <cmath>

#include "so3ae/errors.hpp"

namespace so3ae {

std::vector<double> associated_legendre(int l_max, double x) {
  if (l_max < 0) fail(ErrorKind::InvalidArgument, "associated_legendre: l_max < 0");
  if (x < -1.0 || x > 1.0)
    fail(ErrorKind::Domain, "associated_legendre: argument outside [-1, 1]");
  const int n = (l_max + 1) * (l_max + 2) / 2;
  std::vector<double> p(n, 0.0);
  auto at = [&p](int l, int m) -> double& { return p[l * (l + 1) / 2 + m]; };
  const double s = std::sqrt(std::max(0.0, 1.0 - x * x));  // sin(theta)
  at(0, 0) = 1.0;
  // Diagonal: P_m^m = (2m-1)!! s^m, then one step up, then the l-recurrence
  //   (l-m) P_l^m = (2l-1) x P_{l-1}^m - (l+m-1) P_{l-2}^m.
  for (int m = 1; m <= l_max; ++m)
    at(m, m) = at(m - 1, m - 1) * (2 * m - 1) * s;
  for (int m = 0; m < l_max; ++m) at(m + 1, m) = (2 * m + 1) * x * at(m, m);
  for (int m = 0; m <= l_max; ++m)
    for (int l = m + 2; l <= l_max; ++l)
      at(l, m) =
          ((2 * l - 1) * x * at(l - 1, m) - (l + m - 1) * at(l - 2, m)) /
          (l - m);
  return p;
}

std::vector<double> real_spherical_harmonics(int l_max, double theta,
                                             double phi) {
  if (l_max < 0)
    fail(ErrorKind::InvalidArgument, "real_spherical_harmonics: l_max < 0");
  const double x = std::cos(theta);
  const std::vector<double> p = associated_legendre(l_max, std::clamp(x, -1.0, 1.0));
  auto plm = [&p](int l, int m) { return p[l * (l + 1) / 2 + m]; };

  // Normalizations N_{lm}^2 = (2l+1)/(4pi) (l-m)!/(l+m)! built by recurrence
  // to avoid factorial overflow.
  std::vector<double> y((l_max + 1) * (l_max + 1), 0.0);
  const double inv4pi = 1.0 / (4.0 * M_PI);
  std::vector<double> cm(l_max + 1), sm(l_max + 1);
  for (int m = 0; m <= l_max; ++m) {
    cm[m] = std::cos(m * phi);
    sm[m] = std::sin(m * phi);
  }
  for (int l = 0; l <= l_max; ++l) {
    double nsq = (2 * l + 1) * inv4pi;  // N_{l0}^2
    y[l * (l + 1)] = std::sqrt(nsq) * plm(l, 0);
    for (int m = 1; m <= l; ++m) {
      nsq /= double(l - m + 1) * double(l + m);
      const double base = std::sqrt(2.0 * nsq) * plm(l, m);
      y[l * (l + 1) + m] = base * cm[m];
      y[l * (l + 1) - m] = base * sm[m];
    }
  }
  return y;
}

std::vector<double> real_spherical_harmonics_dir(int l_max,
                                                 const Eigen::Vector3d& dir) {
  const double r = dir.norm();
  if (r < 1e-300)
    fail(ErrorKind::Domain, "real_spherical_harmonics_dir: zero direction");
  const double theta = std::acos(std::clamp(dir.z() / r, -1.0, 1.0));
  const double phi = std::atan2(dir.y(), dir.x());
  return real_spherical_harmonics(l_max, theta, phi);
}

}  // namespace so3ae
