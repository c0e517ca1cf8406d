#include "so3ae/zernike.hpp"

#include <cmath>
#include <string>

#include "so3ae/errors.hpp"

namespace so3ae {

double zernike_radial(int n, int l, double r) {
  if (n < 0 || l < 0 || l > n || (n - l) % 2 != 0)
    fail(ErrorKind::Domain,
         "zernike_radial: need 0 <= l <= n with n - l even, got n = " +
             std::to_string(n) + ", l = " + std::to_string(l));
  if (r < 0.0 || r > 1.0)
    fail(ErrorKind::Domain, "zernike_radial: radius outside [0, 1]");

  const int s = (n - l) / 2;
  const double b = l + 0.5;  // Jacobi beta parameter (alpha = 0)
  const double t = 2.0 * r * r - 1.0;

  // Jacobi recurrence P_k^{(0,b)}; the k = 1 seed is (b+2)(t-1)/2 + 1.
  double jac = 1.0;
  if (s >= 1) {
    double pkm1 = 1.0;
    double pk = 1.0 + 0.5 * (b + 2.0) * (t - 1.0);
    for (int k = 2; k <= s; ++k) {
      const double c = 2.0 * k + b;  // 2k + a + b with a = 0
      const double a1 = 2.0 * k * (k + b) * (c - 2.0);
      const double a2 = (c - 1.0) * (c * (c - 2.0) * t - b * b);
      const double a3 = 2.0 * (k - 1.0) * (k + b - 1.0) * c;
      const double pkp = (a2 * pk - a3 * pkm1) / a1;
      pkm1 = pk;
      pk = pkp;
    }
    jac = pk;
  }
  return std::sqrt(2.0 * n + 3.0) * std::pow(r, l) * jac;
}

}  // namespace so3ae
