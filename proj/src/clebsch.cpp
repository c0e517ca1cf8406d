#include "so3ae/clebsch.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <boost/multiprecision/cpp_int.hpp>

#include "so3ae/errors.hpp"

namespace so3ae {

namespace {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

// Fixed-size table built once under the C++11 static-init guarantee, so
// concurrent callers never mutate shared state afterwards.
const cpp_int& factorial_big(int n) {
  constexpr int kMax = 256;
  static const std::vector<cpp_int> cache = [] {
    std::vector<cpp_int> v(kMax + 1);
    v[0] = 1;
    for (int i = 1; i <= kMax; ++i) v[i] = v[i - 1] * i;
    return v;
  }();
  if (n < 0 || n > kMax)
    fail(ErrorKind::InvalidArgument, "factorial table exceeded");
  return cache[n];
}

}  // namespace

bool triangle_ok(int l1, int l2, int l3) {
  return l3 >= std::abs(l1 - l2) && l3 <= l1 + l2;
}

double clebsch_gordan_complex(int l1, int m1, int l2, int m2, int l3, int m3) {
  if (l1 < 0 || l2 < 0 || l3 < 0)
    fail(ErrorKind::InvalidArgument, "clebsch_gordan_complex: negative degree");
  if (std::abs(m1) > l1 || std::abs(m2) > l2 || std::abs(m3) > l3) return 0.0;
  if (m1 + m2 != m3) return 0.0;
  if (!triangle_ok(l1, l2, l3)) return 0.0;

  // Racah's closed form. P collects every factorial ratio under the square
  // root; S is the alternating integer-reciprocal sum. Both are exact
  // rationals, so the only rounding is the final sqrt and product.
  const cpp_rational delta =
      cpp_rational(factorial_big(l1 + l2 - l3) * factorial_big(l1 - l2 + l3) *
                       factorial_big(-l1 + l2 + l3),
                   factorial_big(l1 + l2 + l3 + 1));
  const cpp_rational p =
      cpp_rational(2 * l3 + 1) * delta *
      cpp_rational(factorial_big(l3 + m3) * factorial_big(l3 - m3) *
                   factorial_big(l1 - m1) * factorial_big(l1 + m1) *
                   factorial_big(l2 - m2) * factorial_big(l2 + m2));

  cpp_rational s = 0;
  const int k_min =
      std::max({0, -(l3 - l2 + m1), -(l3 - l1 - m2)});
  const int k_max = std::min({l1 + l2 - l3, l1 - m1, l2 + m2});
  for (int k = k_min; k <= k_max; ++k) {
    cpp_int denom = factorial_big(k) * factorial_big(l1 + l2 - l3 - k) *
                    factorial_big(l1 - m1 - k) * factorial_big(l2 + m2 - k) *
                    factorial_big(l3 - l2 + m1 + k) *
                    factorial_big(l3 - l1 - m2 + k);
    cpp_rational term(1, denom);
    if (k & 1) term = -term;
    s += term;
  }
  if (s == 0) return 0.0;
  const double sd = s.convert_to<double>();
  const double pd = p.convert_to<double>();
  return sd * std::sqrt(pd);
}

Eigen::MatrixXcd complex_to_real_harmonic_matrix(int l) {
  if (l < 0)
    fail(ErrorKind::InvalidArgument,
         "complex_to_real_harmonic_matrix: negative degree");
  const int n = 2 * l + 1;
  const double r = 1.0 / std::sqrt(2.0);
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(n, n);
  u(l, l) = 1.0;
  for (int m = 1; m <= l; ++m) {
    const double sgn = (m & 1) ? -1.0 : 1.0;
    u(l + m, l + m) = sgn * r;               // row m, col m
    u(l + m, l - m) = r;                     // row m, col -m
    u(l - m, l + m) = std::complex<double>(0, -sgn * r);  // row -m, col m
    u(l - m, l - m) = std::complex<double>(0, r);         // row -m, col -m
  }
  return u;
}

double CgBlock::value(int i1, int i2, int i3) const {
  for (const Nz& e : nz)
    if (e.i1 == i1 && e.i2 == i2 && e.i3 == i3) return e.v;
  return 0.0;
}

CgBlock clebsch_gordan_real(int l1, int l2, int l3) {
  if (l1 < 0 || l2 < 0 || l3 < 0)
    fail(ErrorKind::InvalidArgument, "clebsch_gordan_real: negative degree");
  if (!triangle_ok(l1, l2, l3)) {
    std::ostringstream os;
    os << "clebsch_gordan_real: (" << l1 << ", " << l2 << ", " << l3
       << ") violates |l1-l2| <= l3 <= l1+l2";
    fail(ErrorKind::SelectionRule, os.str());
  }
  const Eigen::MatrixXcd u1 = complex_to_real_harmonic_matrix(l1);
  const Eigen::MatrixXcd u2 = complex_to_real_harmonic_matrix(l2);
  const Eigen::MatrixXcd u3 = complex_to_real_harmonic_matrix(l3);

  // i^(l1+l2-l3)
  static const std::complex<double> ipow[4] = {
      {1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const std::complex<double> phase = ipow[((l1 + l2 - l3) % 4 + 4) % 4];

  CgBlock b;
  b.l1 = l1;
  b.l2 = l2;
  b.l3 = l3;
  for (int m1 = -l1; m1 <= l1; ++m1) {
    for (int m2 = -l2; m2 <= l2; ++m2) {
      for (int m3 = -l3; m3 <= l3; ++m3) {
        std::complex<double> acc = 0.0;
        // U rows have at most two nonzero columns (mu = +/-m), so the triple
        // sum below touches at most 8 complex CG values.
        const int c1[2] = {m1, -m1}, c2[2] = {m2, -m2}, c3[2] = {m3, -m3};
        for (int a = 0; a < (m1 ? 2 : 1); ++a) {
          const std::complex<double> f1 = u1(l1 + m1, l1 + c1[a]);
          for (int bb = 0; bb < (m2 ? 2 : 1); ++bb) {
            const std::complex<double> f2 = u2(l2 + m2, l2 + c2[bb]);
            const int mu3 = c1[a] + c2[bb];
            for (int c = 0; c < (m3 ? 2 : 1); ++c) {
              if (c3[c] != mu3) continue;
              const std::complex<double> f3 =
                  std::conj(u3(l3 + m3, l3 + c3[c]));
              acc += f1 * f2 * f3 *
                     clebsch_gordan_complex(l1, c1[a], l2, c2[bb], l3, mu3);
            }
          }
        }
        acc *= phase;
        if (std::abs(acc.imag()) > 1e-12)
          fail(ErrorKind::Numeric,
               "clebsch_gordan_real: non-real coefficient, phase convention "
               "broken");
        if (std::abs(acc.real()) > 1e-14)
          b.nz.push_back({m1 + l1, m2 + l2, m3 + l3, acc.real()});
      }
    }
  }
  return b;
}

CGCache CGCache::build(int l_max) {
  if (l_max < 0) fail(ErrorKind::InvalidArgument, "CGCache: l_max < 0");
  CGCache c;
  c.l_max_ = l_max;
  for (int l1 = 0; l1 <= l_max; ++l1)
    for (int l2 = 0; l2 <= l_max; ++l2)
      for (int l3 = std::abs(l1 - l2); l3 <= std::min(l_max, l1 + l2); ++l3)
        c.blocks_[{l1, l2, l3}] = clebsch_gordan_real(l1, l2, l3);
  return c;
}

bool CGCache::has(int l1, int l2, int l3) const {
  return blocks_.count({l1, l2, l3}) > 0;
}

const CgBlock& CGCache::at(int l1, int l2, int l3) const {
  auto it = blocks_.find({l1, l2, l3});
  if (it == blocks_.end()) {
    std::ostringstream os;
    os << "CGCache: triple (" << l1 << ", " << l2 << ", " << l3
       << ") not present (cache built for l_max = " << l_max_ << ")";
    fail(ErrorKind::Config, os.str());
  }
  return it->second;
}

namespace {

template <typename T>
void put(std::ostream& os, T v) {
  // Little-endian on every platform this targets; serialize bytes directly.
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) fail(ErrorKind::Parse, "CGCache: truncated file");
  return v;
}

}  // namespace

void CGCache::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::Io, "CGCache: cannot open for writing: " + path);
  os.write("SCGC", 4);
  put<std::uint16_t>(os, 1);
  put<std::uint16_t>(os, std::uint16_t(l_max_));
  put<std::uint32_t>(os, std::uint32_t(blocks_.size()));
  for (const auto& [key, blk] : blocks_) {
    put<std::uint16_t>(os, std::uint16_t(key[0]));
    put<std::uint16_t>(os, std::uint16_t(key[1]));
    put<std::uint16_t>(os, std::uint16_t(key[2]));
    const int n1 = 2 * key[0] + 1, n2 = 2 * key[1] + 1, n3 = 2 * key[2] + 1;
    std::vector<double> dense(std::size_t(n1) * n2 * n3, 0.0);
    for (const auto& e : blk.nz)
      dense[(std::size_t(e.i1) * n2 + e.i2) * n3 + e.i3] = e.v;
    os.write(reinterpret_cast<const char*>(dense.data()),
             std::streamsize(dense.size() * sizeof(double)));
  }
  if (!os) fail(ErrorKind::Io, "CGCache: write failed: " + path);
}

CGCache CGCache::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::Io, "CGCache: cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SCGC", 4) != 0)
    fail(ErrorKind::Parse, "CGCache: bad magic in " + path);
  const auto version = get<std::uint16_t>(is);
  if (version != 1) fail(ErrorKind::Parse, "CGCache: unsupported version");
  CGCache c;
  c.l_max_ = get<std::uint16_t>(is);
  const auto count = get<std::uint32_t>(is);
  for (std::uint32_t t = 0; t < count; ++t) {
    CgBlock b;
    b.l1 = get<std::uint16_t>(is);
    b.l2 = get<std::uint16_t>(is);
    b.l3 = get<std::uint16_t>(is);
    const int n1 = 2 * b.l1 + 1, n2 = 2 * b.l2 + 1, n3 = 2 * b.l3 + 1;
    std::vector<double> dense(std::size_t(n1) * n2 * n3);
    is.read(reinterpret_cast<char*>(dense.data()),
            std::streamsize(dense.size() * sizeof(double)));
    if (!is) fail(ErrorKind::Parse, "CGCache: truncated block in " + path);
    for (int i1 = 0; i1 < n1; ++i1)
      for (int i2 = 0; i2 < n2; ++i2)
        for (int i3 = 0; i3 < n3; ++i3) {
          const double v = dense[(std::size_t(i1) * n2 + i2) * n3 + i3];
          if (v != 0.0) b.nz.push_back({i1, i2, i3, v});
        }
    c.blocks_[{b.l1, b.l2, b.l3}] = std::move(b);
  }
  return c;
}

}  // namespace so3ae
