#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "so3ae/errors.hpp"
#include "so3ae/fourier.hpp"
#include "so3ae/spherical.hpp"
#include "so3ae/zernike.hpp"
#include "testutil.hpp"

using namespace so3ae;

namespace {

// Independent oracle: project a band-limited density onto the Zernike basis
// by dense quadrature (radial Gauss-Legendre against r^2 dr, tensored with
// the spherical rule). Used to close the inverse-then-forward loop without
// going through zft_point_cloud's Dirac-sum shortcut.
SteerableTensor quadrature_zft(
    const std::function<Eigen::VectorXd(const Eigen::Vector3d&)>& density,
    const ZftConfig& cfg) {
  const auto gl = testutil::gauss_legendre(64);
  const auto sq = testutil::sphere_quadrature(2 * cfg.L + 16, 4 * cfg.L + 32);
  SteerableTensor out(zft_signature(cfg));
  const int n_lab = int(cfg.labels.size());
  for (int i = 0; i < 64; ++i) {
    const double r = 0.5 * (gl.x[i] + 1.0);
    const double wr = 0.5 * gl.w[i] * r * r;
    for (std::size_t p = 0; p < sq.theta.size(); ++p) {
      const Eigen::Vector3d dir(std::sin(sq.theta[p]) * std::cos(sq.phi[p]),
                                std::sin(sq.theta[p]) * std::sin(sq.phi[p]),
                                std::cos(sq.theta[p]));
      const Eigen::VectorXd rho = density(cfg.r_max * r * dir);
      const auto y = real_spherical_harmonics(cfg.L, sq.theta[p], sq.phi[p]);
      for (int l = 0; l <= cfg.L; ++l) {
        const int cnt = zft_radial_count(cfg, l);
        Eigen::MatrixXd& blk = out.block_for_degree(l);
        for (int k = 0; k < cnt; ++k) {
          const double radial = zernike_radial(l + 2 * k, l, r);
          for (int lab = 0; lab < n_lab; ++lab)
            for (int m = -l; m <= l; ++m)
              blk(lab * cnt + k, m + l) +=
                  wr * sq.weight[p] * rho[lab] * radial * y[l * (l + 1) + m];
        }
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("zernike radial: pinned values and domain checks") {
  CHECK(zernike_radial(0, 0, 0.3) == doctest::Approx(std::sqrt(3.0)));
  CHECK(zernike_radial(1, 1, 0.3) == doctest::Approx(std::sqrt(5.0) * 0.3));
  CHECK(zernike_radial(2, 0, 0.3) ==
        doctest::Approx(std::sqrt(7.0) / 2.0 * (5.0 * 0.09 - 3.0)));
  CHECK_THROWS_AS(zernike_radial(2, 1, 0.5), Error);   // parity
  CHECK_THROWS_AS(zernike_radial(1, 2, 0.5), Error);   // l > n
  CHECK_THROWS_AS(zernike_radial(2, 0, 1.5), Error);   // outside ball
  CHECK_THROWS_AS(zernike_radial(2, 0, -0.1), Error);
}

TEST_CASE("zernike radial: orthonormal against the r^2 measure") {
  const auto gl = testutil::gauss_legendre(128);
  double worst = 0.0;
  for (int l = 0; l <= 4; ++l)
    for (int n1 = l; n1 <= 26; n1 += 2)
      for (int n2 = n1; n2 <= 26; n2 += 2) {
        double acc = 0.0;
        for (int i = 0; i < 128; ++i) {
          const double r = 0.5 * (gl.x[i] + 1.0);
          acc += 0.5 * gl.w[i] * r * r * zernike_radial(n1, l, r) *
                 zernike_radial(n2, l, r);
        }
        worst = std::max(worst, std::abs(acc - (n1 == n2 ? 1.0 : 0.0)));
      }
  CHECK(worst < 1e-12);
}

TEST_CASE("zft signature accounting") {
  // L=4, N=20, 4 labels: per label 11+10+10+9+9 = 49 radial slots spread
  // over degrees 0..4 -> 235 coefficients, 940 with 4 labels.
  ZftConfig cfg{4, 20, 1.0, {"a", "b", "c", "d"}};
  CHECK(zft_signature(cfg).coeff_count() == 940);
  ZftConfig cfg26{4, 26, 1.0, {"a", "b", "c", "d"}};
  CHECK(zft_signature(cfg26).coeff_count() == 1240);
  ZftConfig cfg1{4, 20, 1.0, {"x"}};
  CHECK(zft_signature(cfg1).coeff_count() == 235);
  // Degree-wise channel counts for the 4-label config.
  const TensorSignature sig = zft_signature(cfg);
  CHECK(sig.channels(0) == 44);
  CHECK(sig.channels(1) == 40);
  CHECK(sig.channels(2) == 40);
  CHECK(sig.channels(3) == 36);
  CHECK(sig.channels(4) == 36);

  CHECK_THROWS_AS(zft_signature(ZftConfig{4, 3, 1.0, {"a"}}), Error);
  CHECK_THROWS_AS(zft_signature(ZftConfig{4, 20, 0.0, {"a"}}), Error);
  CHECK_THROWS_AS(zft_signature(ZftConfig{4, 20, 1.0, {"a", "a"}}), Error);
  CHECK_THROWS_AS(zft_signature(ZftConfig{4, 20, 1.0, {}}), Error);
}

TEST_CASE("zft of a point on the polar axis") {
  // Single unit-weight point at radius 0.6 on +z: coefficients are
  // R^n_l(0.6) Y_l0(north pole), and all m != 0 entries vanish.
  ZftConfig cfg{3, 7, 1.0, {"only"}};
  PointCloud cloud;
  cloud.points.push_back({{0.0, 0.0, 0.6}, "only", 1.0});
  const SteerableTensor z = zft_point_cloud(cloud, cfg);
  for (int l = 0; l <= 3; ++l) {
    const int cnt = zft_radial_count(cfg, l);
    const double y_pole =
        std::sqrt((2.0 * l + 1.0) / (4.0 * M_PI));  // Y_l0 at theta = 0
    for (int k = 0; k < cnt; ++k)
      for (int m = -l; m <= l; ++m) {
        const double got = z.block_for_degree(l)(k, m + l);
        const double want =
            (m == 0) ? zernike_radial(l + 2 * k, l, 0.6) * y_pole : 0.0;
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
      }
  }
}

TEST_CASE("zft: weights, label routing, origin handling") {
  ZftConfig cfg{2, 4, 2.0, {"u", "v"}};
  PointCloud cloud;
  cloud.points.push_back({{0.3, -0.2, 0.5}, "u", 2.0});
  cloud.points.push_back({{-0.4, 0.1, 0.2}, "v", 0.5});
  cloud.points.push_back({{0.0, 0.0, 0.0}, "v", 1.0});  // origin point
  const SteerableTensor z = zft_point_cloud(cloud, cfg);

  // Equals the weighted sum of single-point transforms.
  SteerableTensor expect(zft_signature(cfg));
  for (const CloudPoint& p : cloud.points) {
    PointCloud single;
    single.points.push_back(p);
    const SteerableTensor zp = zft_point_cloud(single, cfg);
    for (std::size_t b = 0; b < expect.num_blocks(); ++b)
      expect.block(b) += zp.block(b);
  }
  CHECK(testutil::max_abs_diff(z, expect) < 1e-14);

  // Label groups: the "u" point contributes only to the first group.
  PointCloud u_only;
  u_only.points.push_back(cloud.points[0]);
  const SteerableTensor zu = zft_point_cloud(u_only, cfg);
  for (int l = 0; l <= 2; ++l) {
    const int cnt = zft_radial_count(cfg, l);
    CHECK(zu.block_for_degree(l).bottomRows(cnt).cwiseAbs().maxCoeff() == 0.0);
  }

  // Out-of-ball and unknown labels are rejected with the point index.
  PointCloud outside;
  outside.points.push_back({{3.0, 0.0, 0.0}, "u", 1.0});
  CHECK_THROWS_WITH_AS(zft_point_cloud(outside, cfg),
                       doctest::Contains("point 0"), Error);
  PointCloud bad_label;
  bad_label.points.push_back({{0.1, 0.0, 0.0}, "w", 1.0});
  CHECK_THROWS_AS(zft_point_cloud(bad_label, cfg), Error);
}

TEST_CASE("zft equivariance: rotating the cloud rotates the tensor") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> nd;
  ZftConfig cfg{4, 10, 1.5, {"p", "q"}};
  for (int t = 0; t < 8; ++t) {
    PointCloud cloud;
    for (int i = 0; i < 12; ++i) {
      Eigen::Vector3d v(nd(rng), nd(rng), nd(rng));
      v = v.normalized() * (0.1 + 1.3 * std::abs(nd(rng)) / 3.0);
      if (v.norm() > 1.45) v *= 1.45 / v.norm();
      cloud.points.push_back({v, (i % 2) ? "p" : "q", 0.5 + (i % 3)});
    }
    const Rotation r = testutil::random_rotation(rng);
    PointCloud rotated;
    for (const CloudPoint& p : cloud.points)
      rotated.points.push_back({r.matrix() * p.xyz, p.label, p.weight});
    const SteerableTensor a = zft_point_cloud(rotated, cfg);
    const SteerableTensor b = rotate(zft_point_cloud(cloud, cfg), r);
    CHECK(testutil::max_abs_diff(a, b) < 1e-10);
  }
}

TEST_CASE("zft round trip: synthesize then re-project by quadrature") {
  // Random band-limited coefficients -> density via inverse_zft -> quadrature
  // projection recovers them. This closes the loop between the closed-form
  // point transform, the synthesis formula, and the orthonormality of the
  // basis.
  std::mt19937_64 rng(37);
  ZftConfig cfg{3, 9, 1.25, {"m", "n"}};
  const SteerableTensor x = random_tensor(zft_signature(cfg), rng);
  auto density = [&](const Eigen::Vector3d& p) -> Eigen::VectorXd {
    const Eigen::MatrixXd row = inverse_zft(x, {p}, cfg);
    return row.row(0).transpose();
  };
  const SteerableTensor back = quadrature_zft(density, cfg);
  double scale = testutil::max_abs(x);
  CHECK(testutil::max_abs_diff(x, back) / scale < 1e-6);
}

TEST_CASE("point cloud text round trip and parse errors") {
  const std::string path = "cloud_test.txt";
  {
    std::ofstream os(path);
    os << "# comment line\n";
    os << "0.25 -0.5 0.125 alpha\n";
    os << "\n";
    os << "1.5 2.5 -3.5 beta 2.25   # trailing comment\n";
  }
  const PointCloud c = read_point_cloud(path);
  REQUIRE(c.points.size() == 2);
  CHECK(c.points[0].xyz == Eigen::Vector3d(0.25, -0.5, 0.125));
  CHECK(c.points[0].label == "alpha");
  CHECK(c.points[0].weight == 1.0);
  CHECK(c.points[1].weight == 2.25);

  write_point_cloud(c, path);
  const PointCloud c2 = read_point_cloud(path);
  REQUIRE(c2.points.size() == 2);
  for (int i = 0; i < 2; ++i) {
    CHECK(c2.points[i].xyz == c.points[i].xyz);  // bit-exact
    CHECK(c2.points[i].weight == c.points[i].weight);
  }

  {
    std::ofstream os(path);
    os << "0.5 0.5\n";  // too few fields
  }
  CHECK_THROWS_WITH_AS(read_point_cloud(path), doctest::Contains(":1"), Error);
  {
    std::ofstream os(path);
    os << "0 0 0 ok 1.0 extra\n";
  }
  CHECK_THROWS_AS(read_point_cloud(path), Error);
  std::remove(path.c_str());
}

TEST_CASE("driscoll-healy weights sum to the full polar measure") {
  for (int bw : {2, 4, 8, 16}) {
    const auto w = dh_quadrature_weights(bw);
    double s = 0.0;
    for (double v : w) s += v;
    CHECK(s == doctest::Approx(2.0).epsilon(1e-13));
  }
}

TEST_CASE("sft of a constant signal") {
  // f = c everywhere: fhat_00 = c * 2 sqrt(pi), everything else 0.
  const double c = 0.8125;
  SphericalSignal s;
  s.bw = 8;
  s.channels = {Eigen::MatrixXd::Constant(16, 16, c)};
  const SteerableTensor t = sft_grid(s, 5);
  CHECK(std::abs(t.block_for_degree(0)(0, 0) - c * 2.0 * std::sqrt(M_PI)) <
        1e-9);
  for (int l = 1; l <= 5; ++l)
    CHECK(t.block_for_degree(l).cwiseAbs().maxCoeff() < 1e-12);
  // And the inverse of a pure Y_00 coefficient a is the constant a/(2 sqrt pi).
  SteerableTensor y0(TensorSignature({{0, 1}}));
  y0.block(0)(0, 0) = 3.0;
  const SphericalSignal g = inverse_sft(y0, 4);
  CHECK((g.channels[0].array() - 3.0 / (2.0 * std::sqrt(M_PI))).abs().maxCoeff() <
        1e-12);
}

TEST_CASE("sft round trip: band-limited synthesis then analysis") {
  std::mt19937_64 rng(41);
  const int L = 10, bw = 16;
  const TensorSignature sig = TensorSignature::uniform(L, 2);
  CHECK(sig.coeff_count() == 242);  // 121 per channel at L = 10
  const SteerableTensor x = random_tensor(sig, rng);
  const SphericalSignal g = inverse_sft(x, bw);
  const SteerableTensor back = sft_grid(g, L);
  CHECK(testutil::max_abs_diff(x, back) / testutil::max_abs(x) < 1e-6);
}

TEST_CASE("sft aliasing and shape errors") {
  SphericalSignal s;
  s.bw = 4;
  s.channels = {Eigen::MatrixXd::Zero(8, 8)};
  CHECK_THROWS_AS(sft_grid(s, 4), Error);   // L >= bw
  CHECK_THROWS_AS(sft_grid(s, 7), Error);
  s.channels = {Eigen::MatrixXd::Zero(4, 8)};
  CHECK_THROWS_AS(sft_grid(s, 2), Error);   // wrong grid shape
  std::mt19937_64 rng(43);
  const SteerableTensor bad =
      random_tensor(TensorSignature({{0, 2}, {1, 3}}), rng);
  CHECK_THROWS_AS(inverse_sft(bad, 8), Error);  // non-uniform channels
  const SteerableTensor x = random_tensor(TensorSignature::uniform(3, 1), rng);
  CHECK_THROWS_AS(inverse_sft(x, 3), Error);    // bw too small
}

TEST_CASE("spherical signal binary round trip") {
  std::mt19937_64 rng(47);
  std::normal_distribution<double> nd;
  SphericalSignal s;
  s.bw = 3;
  s.channels.assign(2, Eigen::MatrixXd(6, 6));
  for (auto& c : s.channels)
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) c(i, j) = nd(rng);
  const std::string path = "sig_test.bin";
  write_spherical_signal(s, path);
  const SphericalSignal r = read_spherical_signal(path);
  CHECK(r.bw == 3);
  REQUIRE(r.channels.size() == 2);
  for (int c = 0; c < 2; ++c)
    CHECK((r.channels[c] - s.channels[c]).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}
