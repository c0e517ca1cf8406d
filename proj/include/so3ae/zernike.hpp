#pragma once

namespace so3ae {

// 3D Zernike radial polynomials R^n_l on the unit ball, orthonormal against
// the r^2 measure:
//
//   integral_0^1 R^n_l(r) R^{n'}_l(r) r^2 dr = delta_{n n'}.
//
// Indices satisfy 0 <= l <= n with n - l even. The closed form is the
// terminating hypergeometric
//
//   R^n_l(r) = (-1)^s sqrt(2n+3) binom((n+l+1)/2, s) r^l
//              2F1(-s, (n+l+3)/2; l+3/2; r^2),        s = (n-l)/2,
//
// which is algebraically identical to
//
//   R^n_l(r) = sqrt(2n+3) r^l P_s^{(0, l+1/2)}(2 r^2 - 1)
//
// with P the Jacobi polynomial (the binomial and Pochhammer prefactors
// cancel exactly). The Jacobi three-term recurrence in s is used for
// evaluation: the alternating power series loses ~8 digits at n ~ 26 near
// r = 1, the recurrence does not.
//
// Arguments outside [0, 1], n < 0, l < 0, l > n, or odd n - l raise
// domain errors.
double zernike_radial(int n, int l, double r);

}  // namespace so3ae
