#pragma once

// Shared test helpers: deterministic random generators and, crucially, the
// independent numerical oracles (Gauss-Legendre quadrature on the sphere,
// rank statistics) that the library implementations are checked against.
// Everything here is intentionally written with brute force and no reuse of
// the library's own algebra beyond harmonic evaluation.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "so3ae/rotation.hpp"
#include "so3ae/signature.hpp"
#include "so3ae/spherical.hpp"
#include "so3ae/steerable.hpp"

namespace testutil {

// Uniform random rotation via normalized quaternions (Marsaglia).
inline so3ae::Rotation random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return so3ae::Rotation(q.toRotationMatrix());
}

// Gauss-Legendre nodes and weights on [-1, 1], found by Newton iteration on
// the Legendre polynomial; exact for polynomials of degree <= 2n-1.
struct Quadrature1D {
  std::vector<double> x, w;
};

inline Quadrature1D gauss_legendre(int n) {
  Quadrature1D q;
  q.x.resize(n);
  q.w.resize(n);
  for (int i = 0; i < n; ++i) {
    // Chebyshev-based initial guess for the i-th root.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) {
        q.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        break;
      }
    }
    q.x[i] = x;
  }
  return q;
}

// Tensor-product quadrature over the unit sphere: Gauss-Legendre in
// cos(theta) times a uniform trapezoid in phi. Exact for spherical
// polynomials with polar degree <= 2*n_theta - 1 and azimuthal order
// < n_phi; integrates f(theta, phi) against the solid-angle measure.
struct SphereQuadrature {
  std::vector<double> theta, phi, weight;  // parallel arrays, one per node
};

inline SphereQuadrature sphere_quadrature(int n_theta, int n_phi) {
  const Quadrature1D gl = gauss_legendre(n_theta);
  SphereQuadrature s;
  const double wphi = 2.0 * M_PI / n_phi;
  for (int i = 0; i < n_theta; ++i) {
    const double th = std::acos(gl.x[i]);
    for (int j = 0; j < n_phi; ++j) {
      s.theta.push_back(th);
      s.phi.push_back(wphi * j);
      s.weight.push_back(gl.w[i] * wphi);
    }
  }
  return s;
}

// Brute-force triple-product integrals over the sphere for all m-orders of
// one degree triple: T[i1][i2][i3] = integral of Y_{l1 m1} Y_{l2 m2}
// Y_{l3 m3} dOmega, with i_k = m_k + l_k. The quadrature is chosen exact
// for the band limit of the integrand.
inline std::vector<std::vector<std::vector<double>>> triple_product_integrals(
    int l1, int l2, int l3) {
  const int l_max = std::max({l1, l2, l3});
  const int band = l1 + l2 + l3;
  const SphereQuadrature q = sphere_quadrature(band / 2 + 2, 2 * band + 4);
  const int n1 = 2 * l1 + 1, n2 = 2 * l2 + 1, n3 = 2 * l3 + 1;
  std::vector t(n1, std::vector(n2, std::vector<double>(n3, 0.0)));
  for (std::size_t p = 0; p < q.theta.size(); ++p) {
    const std::vector<double> y =
        so3ae::real_spherical_harmonics(l_max, q.theta[p], q.phi[p]);
    auto Y = [&y](int l, int m) { return y[l * (l + 1) + m]; };
    for (int m1 = -l1; m1 <= l1; ++m1)
      for (int m2 = -l2; m2 <= l2; ++m2)
        for (int m3 = -l3; m3 <= l3; ++m3)
          t[m1 + l1][m2 + l2][m3 + l3] +=
              q.weight[p] * Y(l1, m1) * Y(l2, m2) * Y(l3, m3);
  }
  return t;
}

// Spearman rank correlation with average ranks for ties.
inline std::vector<double> ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * (i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

inline double pearson(const std::vector<double>& a,
                      const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline double spearman(const std::vector<double>& a,
                       const std::vector<double>& b) {
  return pearson(ranks(a), ranks(b));
}

// Random signature with degrees 0..l_max and 1..c_max channels per degree
// (every degree present, to exercise all coupling paths).
inline so3ae::TensorSignature random_signature(std::mt19937_64& rng, int l_max,
                                               int c_max) {
  std::uniform_int_distribution<int> cdist(1, c_max);
  std::vector<so3ae::SigPart> parts;
  for (int l = 0; l <= l_max; ++l) parts.push_back({l, cdist(rng)});
  return so3ae::TensorSignature(parts);
}

// Max absolute difference between two same-signature tensors.
inline double max_abs_diff(const so3ae::SteerableTensor& a,
                           const so3ae::SteerableTensor& b) {
  double m = 0.0;
  for (std::size_t p = 0; p < a.num_blocks(); ++p)
    m = std::max(m, (a.block(p) - b.block(p)).cwiseAbs().maxCoeff());
  return m;
}

inline double max_abs(const so3ae::SteerableTensor& a) {
  double m = 0.0;
  for (std::size_t p = 0; p < a.num_blocks(); ++p)
    m = std::max(m, a.block(p).cwiseAbs().maxCoeff());
  return m;
}

}  // namespace testutil
