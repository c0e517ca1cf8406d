#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace so3ae {

// Clebsch-Gordan coefficient <l1 m1 l2 m2 | l3 m3> in the complex
// (Condon-Shortley) basis, evaluated from the Racah closed form with exact
// integer arithmetic: the alternating sum and the factorial-ratio prefactor
// are accumulated as arbitrary-precision rationals and only the final
// rational and its square root are rounded to double. Selection-rule
// violations (triangle inequality, |m| > l) and m3 != m1 + m2 return 0;
// negative degrees raise invalid-argument.
double clebsch_gordan_complex(int l1, int m1, int l2, int m2, int l3, int m3);

// Change of basis from complex to real harmonics, Y^R_{lm} = sum_mu
// U[m,mu] Y^C_{lmu}. Rows are real indices m, columns complex mu, both
// offset by +l. Explicitly (m > 0):
//   U[0,0]   = 1
//   U[m,m]   = (-1)^m/sqrt2, U[m,-m]  = 1/sqrt2
//   U[-m,m]  = -i(-1)^m/sqrt2, U[-m,-m] = i/sqrt2
// U is unitary, and conj(U) = U Lambda with Lambda[mu,nu] =
// (-1)^mu delta_{mu,-nu} (the complex-conjugation symmetry of Y^C).
Eigen::MatrixXcd complex_to_real_harmonic_matrix(int l);

// Real-basis Clebsch-Gordan block for the triple (l1, l2, l3):
//
//   B[m1, m2, m3] = i^(l1+l2-l3) * sum_{mu1 mu2 mu3}
//        U1[m1,mu1] U2[m2,mu2] conj(U3[m3,mu3]) <l1 mu1 l2 mu2 | l3 mu3>
//
// The i^(l1+l2-l3) phase makes the block exactly real for every parity and
// fixes the sign convention so that B(l, l, 0)[m1, m2] = delta / sqrt(2l+1):
// the degree-0 component of x (x) x is |x|^2 / sqrt(2l+1), hence the
// generalized dot product built from these blocks is positive definite.
//
// Equivariance: sum_{m1 m2} B[m1,m2,m3] (D_l1 x)_{m1} (D_l2 y)_{m2}
//             = sum_{m3'} D_l3[m3, m3'] (x (x) y)_{m3'}.
//
// Per-m3 orthogonality sum_{m1,m2} B[m1,m2,m3]^2 = 1 is inherited from the
// complex coefficients. Violating the triangle rule raises selection-rule.
//
// Values are indexed with 0-based m-offsets: value(i1, i2, i3) where
// i_k = m_k + l_k.
struct CgBlock {
  int l1 = 0, l2 = 0, l3 = 0;
  // Sparse nonzero list (the blocks are ~90% zeros at moderate degrees).
  struct Nz {
    int i1, i2, i3;
    double v;
  };
  std::vector<Nz> nz;

  double value(int i1, int i2, int i3) const;  // 0 when absent
};

CgBlock clebsch_gordan_real(int l1, int l2, int l3);

// Precomputed table of real CG blocks for all admissible triples with
// l1, l2, l3 <= l_max. Lookup of a missing triple raises a configuration
// error (the cache degree must cover the requesting operation).
class CGCache {
 public:
  CGCache() = default;
  static CGCache build(int l_max);

  int l_max() const { return l_max_; }
  bool has(int l1, int l2, int l3) const;
  const CgBlock& at(int l1, int l2, int l3) const;

  // Binary file layout (little-endian):
  //   u8 magic[4] = "SCGC", u16 version = 1, u16 l_max,
  //   u32 triple count, then per triple (lexicographically sorted):
  //   u16 l1, u16 l2, u16 l3 followed by the dense block of
  //   (2l1+1)(2l2+1)(2l3+1) f64 values, m-major order
  //   index = (i1*(2l2+1) + i2)*(2l3+1) + i3.
  void save(const std::string& path) const;
  static CGCache load(const std::string& path);

 private:
  int l_max_ = -1;
  std::map<std::array<int, 3>, CgBlock> blocks_;
};

// True when (l1, l2, l3) satisfies the triangle rule |l1-l2|<=l3<=l1+l2.
bool triangle_ok(int l1, int l2, int l3);

}  // namespace so3ae
