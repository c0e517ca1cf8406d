#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "so3ae/steerable.hpp"

namespace so3ae {

// ---------------------------------------------------------------------------
// Point clouds (Zernike transform input)
// ---------------------------------------------------------------------------

// A weighted, labeled point cloud. Labels index into `labels` of the
// ZftConfig used to transform the cloud; they are kept as strings here and
// resolved at transform time.
struct CloudPoint {
  Eigen::Vector3d xyz;
  std::string label;
  double weight = 1.0;
};

struct PointCloud {
  std::vector<CloudPoint> points;
};

// Text format, one point per line: "x y z label [weight]", '#' starts a
// comment, blank lines ignored. Malformed lines raise parse errors citing
// the 1-based line number.
PointCloud read_point_cloud(const std::string& path);
void write_point_cloud(const PointCloud& cloud, const std::string& path);

// ---------------------------------------------------------------------------
// Zernike Fourier transform (ball-supported point clouds)
// ---------------------------------------------------------------------------

// Forward coefficients of the density rho(x) = sum_i w_i delta(x - x_i)
// against the orthonormal ball basis Z_{nlm}(x) = R^n_l(|x|/r_max)
// Y_{lm}(xhat):
//
//   Z^n_{lm} = sum_i w_i R^n_l(r_i / r_max) Y_{lm}(theta_i, phi_i).
//
// Output signature: for each degree l <= L the radial indices
// n in {l, l+2, ..., <= N} form the channels of one label group; label
// groups are concatenated degree-wise in the declared label order, so the
// channel index at degree l is label_index * count(l) + n_index with
// count(l) = floor((N - l)/2) + 1.
struct ZftConfig {
  int L = 0;                        // maximum degree
  int N = 0;                        //. maximum radial index
  double r_max = 1.0;               // ball radius
  std::vector<std::string> labels;  // declared channel label set

  void validate() const;  // L >= 0, N >= L, r_max > 0, nonempty unique labels
};

TensorSignature zft_signature(const ZftConfig& cfg);

// Radial channel count per degree and the n value of a channel slot.
int zft_radial_count(const ZftConfig& cfg, int l);

SteerableTensor zft_point_cloud(const PointCloud& cloud, const ZftConfig& cfg);

// Band-limited density reconstruction: per label,
//   rho_label(x) = sum_{nlm} Z^n_{lm} R^n_l(|x|/r_max) Y_{lm}(xhat).
// Returns one row per query point, one column per label. Query points
// outside the ball raise data-bounds errors.
Eigen::MatrixXd inverse_zft(const SteerableTensor& x,
                            const std::vector<Eigen::Vector3d>& query,
                            const ZftConfig& cfg);

// ---------------------------------------------------------------------------
// Spherical Fourier transform (grid-sampled signals)
// ---------------------------------------------------------------------------

// Equiangular bandwidth-bw grid: theta_j = pi (2j+1) / (4 bw) for
// j = 0..2bw-1 and phi_k = pi k / bw for k = 0..2bw-1; quadrature weights
//
//   w_j = (2 / bw) sin(theta_j) sum_{p=0}^{bw-1} sin((2p+1) theta_j) / (2p+1)
//
// which integrate band-limited signals exactly (sum_j w_j = 2).
std::vector<double> dh_quadrature_weights(int bw);
std::vector<double> dh_thetas(int bw);
std::vector<double> dh_phis(int bw);

// Multi-channel signal sampled on the bandwidth-bw grid; each channel is a
// (2bw x 2bw) matrix with theta along rows and phi along columns.
struct SphericalSignal {
  int bw = 0;
  std::vector<Eigen::MatrixXd> channels;

  void validate() const;
};

// Binary format "SSIG": u8 magic[4], u16 version = 1, u32 bw,
// u32 channel count, then per channel 2bw*2bw little-endian f64 values in
// row-major (theta-major) order. Round-trips bit exactly.
SphericalSignal read_spherical_signal(const std::string& path);
void write_spherical_signal(const SphericalSignal& s, const std::string& path);

// Forward transform: fhat_{lm} = (pi / bw) sum_{j,k} w_j f(theta_j, phi_k)
// Y_{lm}(theta_j, phi_k) for l <= L. The output signature has one channel
// per degree per image channel, in image-channel order. Requires L < bw;
// L >= bw raises an aliasing error.
SteerableTensor sft_grid(const SphericalSignal& s, int L);

// Inverse transform of a tensor with uniform per-degree channel count C:
// synthesizes C grid channels at bandwidth bw. Requires bw > max degree.
SphericalSignal inverse_sft(const SteerableTensor& x, int bw);

}  // namespace so3ae
