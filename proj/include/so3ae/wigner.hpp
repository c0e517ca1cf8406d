#pragma once

#include <complex>

#include <Eigen/Dense>

#include "so3ae/rotation.hpp"

namespace so3ae {

// Wigner matrices of the real irreducible representations of SO(3).
//
// D_l(R) is the (2l+1)x(2l+1) orthogonal matrix acting on real-harmonic
// coefficient vectors indexed by m = -l..l (row/col index m+l) such that,
// componentwise in m,
//
//   Y_{lm}(R * xhat) = sum_{m'} D_l(R)[m, m'] Y_{lm'}(xhat),
//
// and D_l is a homomorphism: D_l(R1 R2) = D_l(R1) D_l(R2), D_l(I) = I.
// Equivalently the law quoted with the inverse rotation reads
// Y(R^-1 xhat) = D_l(R^-1) Y(xhat) = D_l(R)^T Y(xhat).
//
// Construction: factor R into z-y-z Euler angles, build the complex Wigner
// matrix D^C_{m'm} = e^{-i m' alpha} d^l_{m'm}(beta) e^{-i m gamma} from the
// factorial sum for the small-d, then change basis to the real harmonics:
// D = conj(U) D^C U^T with U the complex-to-real matrix documented in
// clebsch.hpp. The result is real to rounding; the imaginary residue is
// checked and discarded.
//
// For l = 1 the matrix equals R itself conjugated by the coordinate
// permutation (m=-1,0,+1) <-> (y,z,x), which the tests pin down.
Eigen::MatrixXd wigner_d_real(int l, const Rotation& r);

// Small Wigner d-matrix d^l_{m'm}(beta) (real, complex basis), rows m', cols
// m, both offset by +l. Exposed for tests.
Eigen::MatrixXd wigner_small_d(int l, double beta);

}  // namespace so3ae
