#include "so3ae/steerable.hpp"

#include <cmath>
#include <sstream>

#include "so3ae/errors.hpp"
#include "so3ae/wigner.hpp"

namespace so3ae {

SteerableTensor::SteerableTensor(const TensorSignature& sig) : sig_(sig) {
  blocks_.reserve(sig.num_parts());
  for (const SigPart& p : sig.parts())
    blocks_.push_back(Eigen::MatrixXd::Zero(p.channels, 2 * p.degree + 1));
}

Eigen::MatrixXd& SteerableTensor::block_for_degree(int l) {
  const int i = sig_.part_index(l);
  if (i < 0)
    fail(ErrorKind::Shape, "SteerableTensor: no block of degree " +
                               std::to_string(l) + " in " + sig_.to_string());
  return blocks_[i];
}

const Eigen::MatrixXd& SteerableTensor::block_for_degree(int l) const {
  return const_cast<SteerableTensor*>(this)->block_for_degree(l);
}

std::vector<double> SteerableTensor::to_flat() const {
  std::vector<double> out;
  out.reserve(coeff_count());
  for (const Eigen::MatrixXd& b : blocks_)
    for (Eigen::Index c = 0; c < b.rows(); ++c)
      for (Eigen::Index m = 0; m < b.cols(); ++m) out.push_back(b(c, m));
  return out;
}

SteerableTensor SteerableTensor::from_flat(const TensorSignature& sig,
                                           const std::vector<double>& coeffs) {
  if (coeffs.size() != sig.coeff_count()) {
    std::ostringstream os;
    os << "from_flat: got " << coeffs.size() << " coefficients, signature "
       << sig.to_string() << " needs " << sig.coeff_count();
    fail(ErrorKind::Shape, os.str());
  }
  SteerableTensor t(sig);
  std::size_t k = 0;
  for (std::size_t p = 0; p < t.num_blocks(); ++p) {
    Eigen::MatrixXd& b = t.block(p);
    for (Eigen::Index c = 0; c < b.rows(); ++c)
      for (Eigen::Index m = 0; m < b.cols(); ++m) b(c, m) = coeffs[k++];
  }
  return t;
}

bool SteerableTensor::all_finite() const {
  for (const Eigen::MatrixXd& b : blocks_)
    if (!b.allFinite()) return false;
  return true;
}

SteerableTensor rotate(const SteerableTensor& x, const Rotation& r) {
  SteerableTensor out(x.signature());
  for (std::size_t p = 0; p < x.num_blocks(); ++p) {
    const int l = x.signature().parts()[p].degree;
    const Eigen::MatrixXd d = wigner_d_real(l, r);
    out.block(p) = x.block(p) * d.transpose();
  }
  return out;
}

SteerableTensor cg_tensor_product_full(const SteerableTensor& x,
                                       const SteerableTensor& y, int l_out_max,
                                       const CGCache& cache) {
  if (l_out_max < 0)
    fail(ErrorKind::InvalidArgument, "cg_tensor_product_full: l_out_max < 0");

  // First pass: output channel counts per degree, in fragment order.
  std::vector<int> out_channels(l_out_max + 1, 0);
  for (const SigPart& p1 : x.signature().parts())
    for (const SigPart& p2 : y.signature().parts())
      for (int l3 = std::abs(p1.degree - p2.degree);
           l3 <= std::min(l_out_max, p1.degree + p2.degree); ++l3)
        out_channels[l3] += p1.channels * p2.channels;

  std::vector<SigPart> parts;
  for (int l3 = 0; l3 <= l_out_max; ++l3)
    if (out_channels[l3] > 0) parts.push_back({l3, out_channels[l3]});
  SteerableTensor out((TensorSignature(parts)));

  std::vector<int> cursor(l_out_max + 1, 0);  // next free channel per degree
  for (const SigPart& p1 : x.signature().parts()) {
    const Eigen::MatrixXd& bx = x.block_for_degree(p1.degree);
    for (const SigPart& p2 : y.signature().parts()) {
      const Eigen::MatrixXd& by = y.block_for_degree(p2.degree);
      for (int l3 = std::abs(p1.degree - p2.degree);
           l3 <= std::min(l_out_max, p1.degree + p2.degree); ++l3) {
        const CgBlock& cg = cache.at(p1.degree, p2.degree, l3);
        Eigen::MatrixXd& bo = out.block_for_degree(l3);
        const int base = cursor[l3];
        for (int c1 = 0; c1 < p1.channels; ++c1)
          for (int c2 = 0; c2 < p2.channels; ++c2) {
            const int row = base + c1 * p2.channels + c2;
            for (const CgBlock::Nz& e : cg.nz)
              bo(row, e.i3) += e.v * bx(c1, e.i1) * by(c2, e.i2);
          }
        cursor[l3] += p1.channels * p2.channels;
      }
    }
  }
  return out;
}

double generalized_dot(const SteerableTensor& x, const SteerableTensor& y) {
  if (!(x.signature() == y.signature()))
    fail(ErrorKind::Shape, "generalized_dot: signature mismatch " +
                               x.signature().to_string() + " vs " +
                               y.signature().to_string());
  double acc = 0.0;
  for (std::size_t p = 0; p < x.num_blocks(); ++p) {
    const int l = x.signature().parts()[p].degree;
    acc += x.block(p).cwiseProduct(y.block(p)).sum() / std::sqrt(2.0 * l + 1.0);
  }
  return acc;
}

double cosine_loss(const SteerableTensor& x, const SteerableTensor& y) {
  const double xx = generalized_dot(x, x);
  const double yy = generalized_dot(y, y);
  if (xx <= 0.0 || yy <= 0.0)
    fail(ErrorKind::DegenerateScale,
         "cosine_loss: zero-norm operand has no direction");
  return 1.0 - generalized_dot(x, y) / std::sqrt(xx * yy);
}

double mse(const SteerableTensor& x, const SteerableTensor& y) {
  if (!(x.signature() == y.signature()))
    fail(ErrorKind::Shape, "mse: signature mismatch");
  double acc = 0.0;
  for (std::size_t p = 0; p < x.num_blocks(); ++p)
    acc += (x.block(p) - y.block(p)).squaredNorm();
  return acc / double(x.coeff_count());
}

double total_norm(const SteerableTensor& x) {
  double acc = 0.0;
  for (std::size_t p = 0; p < x.num_blocks(); ++p) {
    const int l = x.signature().parts()[p].degree;
    acc += x.block(p).squaredNorm() / double(2 * l + 1);
  }
  return acc;
}

DatasetNormalizer::DatasetNormalizer(double scale) : scale_(scale) {
  if (!(scale > 0.0) || !std::isfinite(scale))
    fail(ErrorKind::DegenerateScale,
         "DatasetNormalizer: scale must be positive and finite");
}

DatasetNormalizer DatasetNormalizer::fit(
    const std::vector<SteerableTensor>& data) {
  if (data.empty())
    fail(ErrorKind::InvalidArgument, "DatasetNormalizer: empty training set");
  double mean = 0.0;
  for (const SteerableTensor& t : data) mean += std::sqrt(total_norm(t));
  mean /= double(data.size());
  if (!(mean > 0.0))
    fail(ErrorKind::DegenerateScale,
         "DatasetNormalizer: training data has zero mean norm");
  return DatasetNormalizer(mean);
}

SteerableTensor DatasetNormalizer::apply(const SteerableTensor& x) const {
  SteerableTensor out = x;
  for (std::size_t p = 0; p < out.num_blocks(); ++p) out.block(p) /= scale_;
  return out;
}

void DatasetNormalizer::apply_in_place(
    std::vector<SteerableTensor>& data) const {
  for (SteerableTensor& t : data)
    for (std::size_t p = 0; p < t.num_blocks(); ++p) t.block(p) /= scale_;
}

SteerableTensor random_tensor(const TensorSignature& sig, std::mt19937_64& rng,
                              double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  SteerableTensor t(sig);
  for (std::size_t p = 0; p < t.num_blocks(); ++p) {
    Eigen::MatrixXd& b = t.block(p);
    for (Eigen::Index c = 0; c < b.rows(); ++c)
      for (Eigen::Index m = 0; m < b.cols(); ++m) b(c, m) = dist(rng);
  }
  return t;
}

}  // namespace so3ae
