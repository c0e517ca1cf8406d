#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "so3ae/clebsch.hpp"
#include "so3ae/steerable.hpp"

namespace so3ae {

// Degree-pair selection for the efficient tensor product: for every output
// degree l3 we keep a minimum-weight spanning forest of the admissible
// different-degree pair graph (nodes = input degrees, edge (l1,l2) admissible
// when |l1-l2| <= l3 <= l1+l2, weight (2l1+1)(2l2+1)) augmented with every
// same-degree pair (l,l) with 2l >= l3. Ties between equal-weight forests are
// broken toward the lexicographically smallest (weight, l1, l2) edge
// sequence, which is what Kruskal with a sorted edge list produces. Pair
// lists are stored sorted by (l1, l2) with l1 <= l2; this fixes the fragment
// concatenation order of the tensor product.
struct MstPairSet {
  int l_max_in = 0;
  int l_max_out = 0;
  std::vector<std::vector<std::pair<int, int>>> pairs;  // indexed by l3

  const std::vector<std::pair<int, int>>& for_degree(int l3) const;
};

MstPairSet mst_pair_set(int l_max_in, int l_max_out);

// Per-degree channel mixing h_l -> W_l^T h_l. One weight matrix per part of
// the input signature, shaped C_in x C_out for that degree. Degrees are never
// mixed and the 2l+1 column dimension is untouched, so the map commutes with
// the rotation action.
struct LinearParams {
  std::vector<Eigen::MatrixXd> w;
};

SteerableTensor linear_forward(const SteerableTensor& x,
                               const LinearParams& p);

// Channel-wise tensor product restricted to the selected degree pairs.
// Both inputs must share one signature with a uniform channel count C. For
// each output degree l3 the fragments are concatenated pair-major: output
// channel p*C + c holds (x_{l1}^c (x) y_{l2}^c)_{l3} for the p-th pair
// (l1, l2) of pairs.for_degree(l3). Pairs whose degrees are absent from the
// input signature are skipped; degrees left with no fragments are omitted.
SteerableTensor etp_forward(const SteerableTensor& x, const SteerableTensor& y,
                            const MstPairSet& pairs, const CGCache& cache);

TensorSignature etp_output_signature(const TensorSignature& in,
                                     const MstPairSet& pairs);

// Batch norm over per-degree per-channel mean squared feature norms
// N_l^c = (1/B) sum_b |h_{b,l}^c|^2 / (2l+1). Training mode divides by
// sqrt(batch norm + eps), applies the affine weight, and folds the batch norm
// into the running estimate with momentum xi; evaluation mode uses the frozen
// running norms and performs no update.
struct BatchNormState {
  std::vector<Eigen::VectorXd> running;  // per part, length C; norms N^{tr}
  std::vector<Eigen::VectorXd> weight;   // per part, length C; affine w_l^c

  static BatchNormState ones(const TensorSignature& sig);
};

std::vector<SteerableTensor> batch_norm_forward(
    const std::vector<SteerableTensor>& batch, BatchNormState& state,
    bool training, double momentum = 0.1, double eps = 1e-12);

// Signal norm: divide the whole tensor by sqrt(total norm + eps), then scale
// each degree by its affine weight (w has one entry per signature part). The
// pre-affine result has total norm 1.
SteerableTensor signal_norm_forward(const SteerableTensor& x,
                                    const Eigen::VectorXd& w,
                                    double eps = 1e-12);

// Clebsch-Gordan block: BN -> ETP(t, t) -> SN -> Lin, plus an additive skip
// from the block input (shared degrees only, channel tail zero-padded). The
// linearity maps the ETP output signature to uniform channels c_out over
// degrees 0..min(2*l_max_in, l_max_out).
struct CgBlockSpec {
  int l_max_out = 0;
  int c_out = 0;
};

struct CgBlockParams {
  BatchNormState bn;      // aligned with the block input signature
  Eigen::VectorXd sn_w;   // aligned with the ETP output signature
  LinearParams lin;       // ETP output signature -> (l_max_out, c_out)
};

// Signature produced by the block for a given input signature.
TensorSignature cg_block_output_signature(const TensorSignature& in,
                                          const CgBlockSpec& spec);

// Parameter shapes for a block (weights initialised to 1; Lin left empty for
// the caller to fill).
CgBlockParams cg_block_param_shapes(const TensorSignature& in,
                                    const CgBlockSpec& spec,
                                    const MstPairSet& pairs);

std::vector<SteerableTensor> cg_block_forward(
    const std::vector<SteerableTensor>& batch, const CgBlockSpec& spec,
    CgBlockParams& params, const MstPairSet& pairs, const CGCache& cache,
    bool training);

// The additive skip used by the block, exposed for reuse: adds x into base
// for every degree both share, over the first min(C_x, C_base) channels.
void add_skip(SteerableTensor& base, const SteerableTensor& x);

}  // namespace so3ae
