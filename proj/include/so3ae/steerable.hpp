#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "so3ae/clebsch.hpp"
#include "so3ae/rotation.hpp"
#include "so3ae/signature.hpp"

namespace so3ae {

// A steerable tensor: per signature part, a dense C x (2l+1) block whose
// column m+l holds the order-m coefficients of all channels. Under a
// rotation R each block transforms on the right, h_l -> h_l * D_l(R)^T,
// which is the row-vector form of h'_{cm} = sum_{m'} D_l[m,m'] h_{cm'}.
//
// The canonical flat layout (used by serialization and the C API) iterates
// degrees in signature order, channels within a degree, and m from -l to +l.
class SteerableTensor {
 public:
  SteerableTensor() = default;
  explicit SteerableTensor(const TensorSignature& sig);  // zero-initialized

  const TensorSignature& signature() const { return sig_; }
  std::size_t coeff_count() const { return sig_.coeff_count(); }

  Eigen::MatrixXd& block(std::size_t part) { return blocks_[part]; }
  const Eigen::MatrixXd& block(std::size_t part) const { return blocks_[part]; }
  std::size_t num_blocks() const { return blocks_.size(); }

  // Block for a given degree; shape errors when the degree is absent.
  Eigen::MatrixXd& block_for_degree(int l);
  const Eigen::MatrixXd& block_for_degree(int l) const;

  std::vector<double> to_flat() const;
  static SteerableTensor from_flat(const TensorSignature& sig,
                                   const std::vector<double>& coeffs);

  bool all_finite() const;

 private:
  TensorSignature sig_;
  std::vector<Eigen::MatrixXd> blocks_;
};

// h'_l = h_l * D_l(R)^T for every degree block. Exact linearity in h and the
// representation property rotate(rotate(x,R1),R2) = rotate(x, R2*R1) follow
// from the homomorphism property of wigner_d_real.
SteerableTensor rotate(const SteerableTensor& x, const Rotation& r);

// Full Clebsch-Gordan tensor product: every degree pair (l1 from x, l2 from
// y), every channel pair (c1, c2), every admissible output degree
// l3 <= l_out_max. Fragments are concatenated per output degree in
// lexicographic (l1, l2, c1, c2) order, so the output signature (and channel
// provenance) is reproducible. The cache must cover all involved triples.
SteerableTensor cg_tensor_product_full(const SteerableTensor& x,
                                       const SteerableTensor& y, int l_out_max,
                                       const CGCache& cache);

// Rotation-invariant pairing: the sum over shared degrees and channels of
// the degree-0 component of x_l (x) y_l, i.e.
//   <x, y> = sum_l sum_c <x_{lc}, y_{lc}> / sqrt(2l+1).
// Signatures must match exactly. Positive definite by the CG sign
// convention (see clebsch.hpp).
double generalized_dot(const SteerableTensor& x, const SteerableTensor& y);

// Cosine loss 1 - <x,y> / sqrt(<x,x> <y,y>); range [0, 2]. A zero operand
// raises degenerate-scale.
double cosine_loss(const SteerableTensor& x, const SteerableTensor& y);

// Plain mean squared error over the flat coefficient vectors (mean over all
// coefficients). Rotation-invariant when both operands share the rotation.
double mse(const SteerableTensor& x, const SteerableTensor& y);

// Total signal norm sum_l [ sum_{c,m} h_{lcm}^2 ] / (2l+1): the per-degree
// power averaged over orders, summed over degrees.
double total_norm(const SteerableTensor& x);

// Scalar normalizer fitted on a training set: scale = mean of sqrt(total
// norm). Fitting on an empty set or on all-zero data raises
// degenerate-scale; apply() divides every coefficient by the scale.
class DatasetNormalizer {
 public:
  DatasetNormalizer() = default;
  explicit DatasetNormalizer(double scale);
  static DatasetNormalizer fit(const std::vector<SteerableTensor>& data);

  double scale() const { return scale_; }
  SteerableTensor apply(const SteerableTensor& x) const;
  void apply_in_place(std::vector<SteerableTensor>& data) const;

 private:
  double scale_ = 1.0;
};

// Gaussian tensor with i.i.d. N(0, stddev^2) coefficients; test/demo helper.
SteerableTensor random_tensor(const TensorSignature& sig, std::mt19937_64& rng,
                              double stddev = 1.0);

}  // namespace so3ae
