#include "so3ae/wigner.hpp"

#include <cmath>
#include <vector>

#include "so3ae/clebsch.hpp"
#include "so3ae/errors.hpp"

namespace so3ae {

namespace {

// log-free factorial table in extended precision; l <= 64 is far beyond any
// use in this library and stays finite in long double.
const long double* factorials() {
  static std::vector<long double> f = [] {
    std::vector<long double> v(171);
    v[0] = 1.0L;
    for (std::size_t i = 1; i < v.size(); ++i) v[i] = v[i - 1] * i;
    return v;
  }();
  return f.data();
}

}  // namespace

Eigen::MatrixXd wigner_small_d(int l, double beta) {
  if (l < 0) fail(ErrorKind::InvalidArgument, "wigner_small_d: negative degree");
  const long double* fact = factorials();
  const long double ch = std::cos(beta / 2.0L);
  const long double sh = std::sin(beta / 2.0L);
  Eigen::MatrixXd d(2 * l + 1, 2 * l + 1);
  for (int mp = -l; mp <= l; ++mp) {
    for (int m = -l; m <= l; ++m) {
      const long double pref = sqrtl(fact[l + mp] * fact[l - mp] *
                                     fact[l + m] * fact[l - m]);
      const int s_min = std::max(0, m - mp);
      const int s_max = std::min(l + m, l - mp);
      long double sum = 0.0L;
      for (int s = s_min; s <= s_max; ++s) {
        const int pc = 2 * l + m - mp - 2 * s;  // power of cos(beta/2)
        const int ps = mp - m + 2 * s;          // power of sin(beta/2)
        long double term =
            powl(ch, pc) * powl(sh, ps) /
            (fact[l + m - s] * fact[s] * fact[mp - m + s] * fact[l - mp - s]);
        if ((mp - m + s) & 1) term = -term;
        sum += term;
      }
      d(mp + l, m + l) = double(pref * sum);
    }
  }
  return d;
}

Eigen::MatrixXd wigner_d_real(int l, const Rotation& r) {
  if (l < 0) fail(ErrorKind::InvalidArgument, "wigner_d_real: negative degree");
  double alpha, beta, gamma;
  r.to_euler_zyz(alpha, beta, gamma);
  const Eigen::MatrixXd d = wigner_small_d(l, beta);
  const int n = 2 * l + 1;
  using Cplx = std::complex<double>;
  Eigen::MatrixXcd dc(n, n);
  for (int mp = -l; mp <= l; ++mp)
    for (int m = -l; m <= l; ++m)
      dc(mp + l, m + l) = std::exp(Cplx(0, -mp * alpha)) * d(mp + l, m + l) *
                          std::exp(Cplx(0, -m * gamma));
  const Eigen::MatrixXcd u = complex_to_real_harmonic_matrix(l);
  const Eigen::MatrixXcd out = u.conjugate() * dc * u.transpose();
  const double imag = out.imag().cwiseAbs().maxCoeff();
  if (imag > 1e-10)
    fail(ErrorKind::Numeric, "wigner_d_real: non-real result, basis mismatch");
  return out.real();
}

}  // namespace so3ae
