#include "so3ae/fourier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "so3ae/errors.hpp"
#include "so3ae/spherical.hpp"
#include "so3ae/zernike.hpp"

namespace so3ae {

// ---------------------------------------------------------------------------
// Point cloud text IO
// ---------------------------------------------------------------------------

PointCloud read_point_cloud(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::Io, "read_point_cloud: cannot open " + path);
  PointCloud cloud;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    CloudPoint p;
    if (!(ls >> p.xyz.x())) continue;  // blank or comment-only line
    if (!(ls >> p.xyz.y() >> p.xyz.z() >> p.label)) {
      fail(ErrorKind::Parse, path + ":" + std::to_string(lineno) +
                                 ": expected 'x y z label [weight]'");
    }
    if (!(ls >> p.weight)) p.weight = 1.0;
    std::string extra;
    if (ls >> extra)
      fail(ErrorKind::Parse, path + ":" + std::to_string(lineno) +
                                 ": trailing content '" + extra + "'");
    if (!p.xyz.allFinite() || !std::isfinite(p.weight))
      fail(ErrorKind::Parse, path + ":" + std::to_string(lineno) +
                                 ": non-finite coordinate or weight");
    cloud.points.push_back(std::move(p));
  }
  return cloud;
}

void write_point_cloud(const PointCloud& cloud, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail(ErrorKind::Io, "write_point_cloud: cannot open " + path);
  os.precision(17);
  for (const CloudPoint& p : cloud.points)
    os << p.xyz.x() << " " << p.xyz.y() << " " << p.xyz.z() << " " << p.label
       << " " << p.weight << "\n";
  if (!os) fail(ErrorKind::Io, "write_point_cloud: write failed " + path);
}

// ---------------------------------------------------------------------------
// ZFT
// ---------------------------------------------------------------------------

void ZftConfig::validate() const {
  if (L < 0) fail(ErrorKind::Config, "ZftConfig: L must be >= 0");
  if (N < L)
    fail(ErrorKind::Config,
         "ZftConfig: radial order N must be >= band limit L (degree l has "
         "no radial index below l)");
  if (!(r_max > 0.0))
    fail(ErrorKind::Config, "ZftConfig: r_max must be positive");
  if (labels.empty())
    fail(ErrorKind::Config, "ZftConfig: at least one channel label required");
  std::set<std::string> uniq(labels.begin(), labels.end());
  if (uniq.size() != labels.size())
    fail(ErrorKind::Config, "ZftConfig: duplicate channel labels");
}

int zft_radial_count(const ZftConfig& cfg, int l) {
  return (cfg.N - l) / 2 + 1;
}

TensorSignature zft_signature(const ZftConfig& cfg) {
  cfg.validate();
  std::vector<SigPart> parts;
  for (int l = 0; l <= cfg.L; ++l)
    parts.push_back({l, int(cfg.labels.size()) * zft_radial_count(cfg, l)});
  return TensorSignature(parts);
}

SteerableTensor zft_point_cloud(const PointCloud& cloud, const ZftConfig& cfg) {
  SteerableTensor out(zft_signature(cfg));
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const CloudPoint& p = cloud.points[i];
    const auto lab =
        std::find(cfg.labels.begin(), cfg.labels.end(), p.label);
    if (lab == cfg.labels.end())
      fail(ErrorKind::DataBounds,
           "zft_point_cloud: point " + std::to_string(i) + " has label '" +
               p.label + "' outside the declared set");
    const int lab_idx = int(lab - cfg.labels.begin());
    const double r = p.xyz.norm();
    if (r > cfg.r_max * (1.0 + 1e-12))
      fail(ErrorKind::DataBounds,
           "zft_point_cloud: point " + std::to_string(i) + " at radius " +
               std::to_string(r) + " lies outside the ball of radius " +
               std::to_string(cfg.r_max));
    const double rn = std::min(r / cfg.r_max, 1.0);
    // At the origin the direction is undefined, but R^n_l(0) = 0 for every
    // l > 0, so only the constant harmonic survives; any theta works.
    std::vector<double> y;
    if (r < 1e-300) {
      y.assign((cfg.L + 1) * (cfg.L + 1), 0.0);
      y[0] = 1.0 / (2.0 * std::sqrt(M_PI));
    } else {
      y = real_spherical_harmonics_dir(cfg.L, p.xyz);
    }
    for (int l = 0; l <= cfg.L; ++l) {
      const int cnt = zft_radial_count(cfg, l);
      Eigen::MatrixXd& blk = out.block_for_degree(l);
      for (int k = 0; k < cnt; ++k) {
        const int n = l + 2 * k;
        const double radial =
            (r < 1e-300 && l > 0) ? 0.0 : zernike_radial(n, l, rn);
        if (radial == 0.0) continue;
        const int c = lab_idx * cnt + k;
        for (int m = -l; m <= l; ++m)
          blk(c, m + l) += p.weight * radial * y[l * (l + 1) + m];
      }
    }
  }
  return out;
}

Eigen::MatrixXd inverse_zft(const SteerableTensor& x,
                            const std::vector<Eigen::Vector3d>& query,
                            const ZftConfig& cfg) {
  if (!(x.signature() == zft_signature(cfg)))
    fail(ErrorKind::Shape,
         "inverse_zft: tensor signature " + x.signature().to_string() +
             " does not match the transform configuration");
  const int n_lab = int(cfg.labels.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(query.size(), n_lab);
  for (std::size_t q = 0; q < query.size(); ++q) {
    const double r = query[q].norm();
    if (r > cfg.r_max * (1.0 + 1e-12))
      fail(ErrorKind::DataBounds, "inverse_zft: query point " +
                                      std::to_string(q) +
                                      " lies outside the ball");
    const double rn = std::min(r / cfg.r_max, 1.0);
    std::vector<double> y;
    if (r < 1e-300) {
      y.assign((cfg.L + 1) * (cfg.L + 1), 0.0);
      y[0] = 1.0 / (2.0 * std::sqrt(M_PI));
    } else {
      y = real_spherical_harmonics_dir(cfg.L, query[q]);
    }
    for (int l = 0; l <= cfg.L; ++l) {
      const int cnt = zft_radial_count(cfg, l);
      const Eigen::MatrixXd& blk = x.block_for_degree(l);
      for (int k = 0; k < cnt; ++k) {
        const double radial =
            (r < 1e-300 && l > 0) ? 0.0 : zernike_radial(l + 2 * k, l, rn);
        if (radial == 0.0) continue;
        for (int lab = 0; lab < n_lab; ++lab) {
          double acc = 0.0;
          for (int m = -l; m <= l; ++m)
            acc += blk(lab * cnt + k, m + l) * y[l * (l + 1) + m];
          out(q, lab) += radial * acc;
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// SFT
// ---------------------------------------------------------------------------

std::vector<double> dh_thetas(int bw) {
  if (bw <= 0) fail(ErrorKind::InvalidArgument, "dh_thetas: bw must be > 0");
  std::vector<double> t(2 * bw);
  for (int j = 0; j < 2 * bw; ++j) t[j] = M_PI * (2 * j + 1) / (4.0 * bw);
  return t;
}

std::vector<double> dh_phis(int bw) {
  if (bw <= 0) fail(ErrorKind::InvalidArgument, "dh_phis: bw must be > 0");
  std::vector<double> p(2 * bw);
  for (int k = 0; k < 2 * bw; ++k) p[k] = M_PI * k / bw;
  return p;
}

std::vector<double> dh_quadrature_weights(int bw) {
  const std::vector<double> thetas = dh_thetas(bw);
  std::vector<double> w(2 * bw);
  for (int j = 0; j < 2 * bw; ++j) {
    double s = 0.0;
    for (int p = 0; p < bw; ++p)
      s += std::sin((2 * p + 1) * thetas[j]) / (2 * p + 1);
    w[j] = (2.0 / bw) * std::sin(thetas[j]) * s;
  }
  return w;
}

void SphericalSignal::validate() const {
  if (bw <= 0) fail(ErrorKind::Config, "SphericalSignal: bw must be > 0");
  if (channels.empty())
    fail(ErrorKind::Config, "SphericalSignal: at least one channel required");
  for (const Eigen::MatrixXd& c : channels)
    if (c.rows() != 2 * bw || c.cols() != 2 * bw)
      fail(ErrorKind::Shape,
           "SphericalSignal: channel grid is not 2bw x 2bw");
}

SteerableTensor sft_grid(const SphericalSignal& s, int L) {
  s.validate();
  if (L < 0) fail(ErrorKind::InvalidArgument, "sft_grid: L must be >= 0");
  if (L >= s.bw) {
    std::ostringstream os;
    os << "sft_grid: band limit L = " << L << " aliases on a bandwidth-"
       << s.bw << " grid (requires L < bw)";
    fail(ErrorKind::Config, os.str());
  }
  const int nc = int(s.channels.size());
  const std::vector<double> thetas = dh_thetas(s.bw);
  const std::vector<double> phis = dh_phis(s.bw);
  const std::vector<double> w = dh_quadrature_weights(s.bw);
  const double cell = M_PI / s.bw;  // 2pi / (2 bw) azimuth measure

  SteerableTensor out(TensorSignature::uniform(L, nc));
  const int ny = (L + 1) * (L + 1);
  std::vector<double> accum(std::size_t(nc) * ny, 0.0);
  for (int j = 0; j < 2 * s.bw; ++j) {
    for (int k = 0; k < 2 * s.bw; ++k) {
      const std::vector<double> y =
          real_spherical_harmonics(L, thetas[j], phis[k]);
      const double wq = cell * w[j];
      for (int c = 0; c < nc; ++c) {
        const double f = wq * s.channels[c](j, k);
        double* dst = accum.data() + std::size_t(c) * ny;
        for (int i = 0; i < ny; ++i) dst[i] += f * y[i];
      }
    }
  }
  for (int l = 0; l <= L; ++l) {
    Eigen::MatrixXd& blk = out.block_for_degree(l);
    for (int c = 0; c < nc; ++c)
      for (int m = -l; m <= l; ++m)
        blk(c, m + l) = accum[std::size_t(c) * ny + l * (l + 1) + m];
  }
  return out;
}

SphericalSignal inverse_sft(const SteerableTensor& x, int bw) {
  if (bw <= 0) fail(ErrorKind::InvalidArgument, "inverse_sft: bw must be > 0");
  const TensorSignature& sig = x.signature();
  const int L = sig.max_degree();
  if (L < 0) fail(ErrorKind::Shape, "inverse_sft: empty tensor");
  if (L >= bw)
    fail(ErrorKind::Config,
         "inverse_sft: tensor band limit requires bw > max degree");
  const int nc = sig.parts().front().channels;
  for (int l = 0; l <= L; ++l)
    if (sig.channels(l) != nc)
      fail(ErrorKind::Shape,
           "inverse_sft: signature must have a uniform channel count over "
           "degrees 0..L, got " +
               sig.to_string());

  SphericalSignal s;
  s.bw = bw;
  s.channels.assign(nc, Eigen::MatrixXd::Zero(2 * bw, 2 * bw));
  const std::vector<double> thetas = dh_thetas(bw);
  const std::vector<double> phis = dh_phis(bw);
  for (int j = 0; j < 2 * bw; ++j)
    for (int k = 0; k < 2 * bw; ++k) {
      const std::vector<double> y =
          real_spherical_harmonics(L, thetas[j], phis[k]);
      for (int l = 0; l <= L; ++l) {
        const Eigen::MatrixXd& blk = x.block_for_degree(l);
        for (int c = 0; c < nc; ++c) {
          double acc = 0.0;
          for (int m = -l; m <= l; ++m)
            acc += blk(c, m + l) * y[l * (l + 1) + m];
          s.channels[c](j, k) += acc;
        }
      }
    }
  return s;
}

// ---------------------------------------------------------------------------
// Spherical signal binary IO
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) fail(ErrorKind::Parse, "spherical signal: truncated file " + path);
  return v;
}

}  // namespace

void write_spherical_signal(const SphericalSignal& s, const std::string& path) {
  s.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::Io, "write_spherical_signal: cannot open " + path);
  os.write("SSIG", 4);
  put<std::uint16_t>(os, 1);
  put<std::uint32_t>(os, std::uint32_t(s.bw));
  put<std::uint32_t>(os, std::uint32_t(s.channels.size()));
  const int n = 2 * s.bw;
  for (const Eigen::MatrixXd& c : s.channels)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) put<double>(os, c(j, k));
  if (!os) fail(ErrorKind::Io, "write_spherical_signal: write failed " + path);
}

SphericalSignal read_spherical_signal(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::Io, "read_spherical_signal: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SSIG", 4) != 0)
    fail(ErrorKind::Parse, "read_spherical_signal: bad magic in " + path);
  if (get<std::uint16_t>(is, path) != 1)
    fail(ErrorKind::Parse, "read_spherical_signal: unsupported version");
  SphericalSignal s;
  s.bw = int(get<std::uint32_t>(is, path));
  const auto nc = get<std::uint32_t>(is, path);
  if (s.bw <= 0 || s.bw > 4096 || nc == 0 || nc > 65536)
    fail(ErrorKind::Parse, "read_spherical_signal: implausible header");
  const int n = 2 * s.bw;
  s.channels.assign(nc, Eigen::MatrixXd::Zero(n, n));
  for (auto& c : s.channels)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) c(j, k) = get<double>(is, path);
  return s;
}

}  // namespace so3ae
