#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "so3ae/errors.hpp"
#include "so3ae/steerable.hpp"
#include "testutil.hpp"

using namespace so3ae;

TEST_CASE("signature validation and bookkeeping") {
  CHECK_THROWS_AS(TensorSignature({{1, 2}, {1, 3}}), Error);  // repeated degree
  CHECK_THROWS_AS(TensorSignature({{2, 2}, {1, 3}}), Error);  // not increasing
  CHECK_THROWS_AS(TensorSignature({{0, 0}}), Error);          // zero channels
  const TensorSignature sig({{0, 4}, {1, 4}, {3, 2}});
  CHECK(sig.max_degree() == 3);
  CHECK(sig.channels(1) == 4);
  CHECK(sig.channels(2) == 0);
  CHECK(sig.coeff_count() == 4 + 12 + 14);
  CHECK(TensorSignature::uniform(10, 1).coeff_count() == 121);
}

TEST_CASE("flat layout round trip is bit exact") {
  std::mt19937_64 rng(1);
  const TensorSignature sig = testutil::random_signature(rng, 4, 5);
  const SteerableTensor t = random_tensor(sig, rng);
  const auto flat = t.to_flat();
  CHECK(flat.size() == sig.coeff_count());
  const SteerableTensor back = SteerableTensor::from_flat(sig, flat);
  CHECK(testutil::max_abs_diff(t, back) == 0.0);
  std::vector<double> wrong(flat.begin(), flat.end() - 1);
  CHECK_THROWS_AS(SteerableTensor::from_flat(sig, wrong), Error);
}

TEST_CASE("rotate: identity, composition, linearity, norm preservation") {
  std::mt19937_64 rng(2);
  const TensorSignature sig = testutil::random_signature(rng, 4, 4);
  const SteerableTensor x = random_tensor(sig, rng);
  CHECK(testutil::max_abs_diff(rotate(x, Rotation::identity()), x) < 1e-14);
  for (int t = 0; t < 10; ++t) {
    const Rotation r1 = testutil::random_rotation(rng);
    const Rotation r2 = testutil::random_rotation(rng);
    // Composition law matching the left action x -> D(R) applied per block.
    const SteerableTensor a = rotate(rotate(x, r1), r2);
    const SteerableTensor b = rotate(x, r2 * r1);
    CHECK(testutil::max_abs_diff(a, b) < 1e-11);
    // Rotation preserves the invariant norms.
    CHECK(total_norm(rotate(x, r1)) ==
          doctest::Approx(total_norm(x)).epsilon(1e-11));
  }
}

TEST_CASE("full CG product: signature accounting against hand counts") {
  // x with degrees (0x2, 1x3), y with degrees (0x1, 2x2), l_out_max = 2:
  //   l3=0: (0,0)->2, (2,2) absent in x; plus (1,?) none; total 2*1 = 2
  //   l3=1: (1,0)->3*1; (1,2)->3*2 = 9
  //   l3=2: (0,2)->2*2; (1,2)->3*2; = 10
  const CGCache cache = CGCache::build(3);
  std::mt19937_64 rng(3);
  const SteerableTensor x =
      random_tensor(TensorSignature({{0, 2}, {1, 3}}), rng);
  const SteerableTensor y =
      random_tensor(TensorSignature({{0, 1}, {2, 2}}), rng);
  const SteerableTensor z = cg_tensor_product_full(x, y, 2, cache);
  CHECK(z.signature() == TensorSignature({{0, 2}, {1, 9}, {2, 10}}));
}

TEST_CASE("full CG product: equivariance over random trials") {
  const CGCache cache = CGCache::build(6);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 15; ++t) {
    const TensorSignature sx = testutil::random_signature(rng, 3, 3);
    const TensorSignature sy = testutil::random_signature(rng, 3, 3);
    const SteerableTensor x = random_tensor(sx, rng);
    const SteerableTensor y = random_tensor(sy, rng);
    const int l_out = 4;
    const Rotation r = testutil::random_rotation(rng);
    const SteerableTensor lhs =
        cg_tensor_product_full(rotate(x, r), rotate(y, r), l_out, cache);
    const SteerableTensor rhs =
        rotate(cg_tensor_product_full(x, y, l_out, cache), r);
    CHECK(testutil::max_abs_diff(lhs, rhs) < 1e-10);
  }
}

TEST_CASE("full CG product with scalar y reduces to channel scaling") {
  const CGCache cache = CGCache::build(3);
  std::mt19937_64 rng(7);
  const TensorSignature sx = testutil::random_signature(rng, 3, 3);
  const SteerableTensor x = random_tensor(sx, rng);
  SteerableTensor y(TensorSignature({{0, 1}}));
  y.block(0)(0, 0) = 2.5;
  const SteerableTensor z = cg_tensor_product_full(x, y, 3, cache);
  // <l m 0 0|l m> = 1, so each block is x scaled by 2.5.
  for (std::size_t p = 0; p < x.num_blocks(); ++p)
    CHECK((z.block(p) - 2.5 * x.block(p)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("generalized dot: closed form, symmetry, positive definiteness") {
  std::mt19937_64 rng(11);
  const TensorSignature sig = testutil::random_signature(rng, 4, 4);
  for (int t = 0; t < 20; ++t) {
    const SteerableTensor x = random_tensor(sig, rng);
    const SteerableTensor y = random_tensor(sig, rng);
    // Direct closed form: sum_l <x_l, y_l>_F / sqrt(2l+1).
    double expect = 0.0;
    for (std::size_t p = 0; p < x.num_blocks(); ++p) {
      const int l = sig.parts()[p].degree;
      expect += x.block(p).cwiseProduct(y.block(p)).sum() /
                std::sqrt(2.0 * l + 1.0);
    }
    CHECK(generalized_dot(x, y) == doctest::Approx(expect).epsilon(1e-13));
    CHECK(generalized_dot(x, y) ==
          doctest::Approx(generalized_dot(y, x)).epsilon(1e-13));
    CHECK(generalized_dot(x, x) > 0.0);
  }
  // The degree-0 output of x (x) x via the CG product equals the per-degree
  // dot contributions: the pairing really is the l3=0 component.
  const CGCache cache = CGCache::build(4);
  const SteerableTensor x = random_tensor(sig, rng);
  const SteerableTensor p0 = cg_tensor_product_full(x, x, 0, cache);
  double diag_sum = 0.0;
  const Eigen::MatrixXd& b0 = p0.block(0);
  // Fragments are (l1, l2, c1, c2) lexicographic; pick the l1 == l2 diagonal
  // channel pairs c1 == c2 and sum them.
  int row = 0;
  for (const SigPart& p1 : sig.parts())
    for (const SigPart& p2 : sig.parts()) {
      if (p1.degree != p2.degree) continue;  // l3 = 0 needs l1 == l2
      for (int c1 = 0; c1 < p1.channels; ++c1)
        for (int c2 = 0; c2 < p2.channels; ++c2) {
          if (c1 == c2) diag_sum += b0(row, 0);
          ++row;
        }
    }
  CHECK(diag_sum == doctest::Approx(generalized_dot(x, x)).epsilon(1e-12));
}

TEST_CASE("losses: invariance under a shared rotation") {
  std::mt19937_64 rng(13);
  const TensorSignature sig = testutil::random_signature(rng, 4, 4);
  for (int t = 0; t < 10; ++t) {
    const SteerableTensor x = random_tensor(sig, rng);
    const SteerableTensor y = random_tensor(sig, rng);
    const Rotation r = testutil::random_rotation(rng);
    const SteerableTensor xr = rotate(x, r);
    const SteerableTensor yr = rotate(y, r);
    CHECK(std::abs(mse(xr, yr) - mse(x, y)) < 1e-9);
    CHECK(std::abs(cosine_loss(xr, yr) - cosine_loss(x, y)) < 1e-9);
    CHECK(std::abs(generalized_dot(xr, yr) - generalized_dot(x, y)) < 1e-9);
    CHECK(std::abs(total_norm(xr) - total_norm(x)) < 1e-9);
  }
  const SteerableTensor x = random_tensor(sig, rng);
  CHECK(cosine_loss(x, x) == doctest::Approx(0.0).epsilon(1e-12));
  SteerableTensor neg = x;
  for (std::size_t p = 0; p < neg.num_blocks(); ++p) neg.block(p) *= -1.0;
  CHECK(cosine_loss(x, neg) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(cosine_loss(x, SteerableTensor(sig)), Error);
}

TEST_CASE("dataset normalizer") {
  // A single training tensor with total norm 4 gives scale 2.
  SteerableTensor t(TensorSignature({{0, 1}}));
  t.block(0)(0, 0) = 2.0;  // total_norm = 4
  const DatasetNormalizer n = DatasetNormalizer::fit({t});
  CHECK(n.scale() == doctest::Approx(2.0));
  CHECK(n.apply(t).block(0)(0, 0) == doctest::Approx(1.0));

  std::mt19937_64 rng(17);
  const TensorSignature sig = testutil::random_signature(rng, 3, 3);
  std::vector<SteerableTensor> data;
  for (int i = 0; i < 32; ++i) data.push_back(random_tensor(sig, rng));
  const DatasetNormalizer fitted = DatasetNormalizer::fit(data);
  double mean = 0.0;
  for (const auto& d : data)
    mean += std::sqrt(total_norm(fitted.apply(d)));
  mean /= double(data.size());
  CHECK(mean == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(DatasetNormalizer::fit({}), Error);
  CHECK_THROWS_AS(DatasetNormalizer::fit({SteerableTensor(sig)}), Error);
}

TEST_CASE("cosine loss vs MSE: noise-level correlation study") {
  // Protocol mirrored by the acceptance suite: Gaussian tensors, noisy
  // copies at uniform noise levels; cosine and MSE must agree in rank on
  // the well-reconstructed subpopulation, and independent pairs sit at
  // cosine ~ 1.
  std::mt19937_64 rng(19);
  const TensorSignature sig = TensorSignature::uniform(4, 8);
  const int n = 400;
  std::vector<SteerableTensor> base;
  for (int i = 0; i < n; ++i) base.push_back(random_tensor(sig, rng));
  const DatasetNormalizer norm = DatasetNormalizer::fit(base);
  norm.apply_in_place(base);
  std::uniform_real_distribution<double> level(0.0, 10.0);
  std::vector<double> cosines, mses;
  const double per_coeff = 1.0 / std::sqrt(double(sig.coeff_count()));
  for (int i = 0; i < n; ++i) {
    const double sd = level(rng) * per_coeff;
    SteerableTensor noisy = base[i];
    std::normal_distribution<double> nd(0.0, sd);
    for (std::size_t p = 0; p < noisy.num_blocks(); ++p)
      for (Eigen::Index c = 0; c < noisy.block(p).rows(); ++c)
        for (Eigen::Index m = 0; m < noisy.block(p).cols(); ++m)
          noisy.block(p)(c, m) += nd(rng);
    cosines.push_back(cosine_loss(base[i], noisy));
    mses.push_back(mse(base[i], noisy));
  }
  std::vector<double> sub_c, sub_m;
  for (int i = 0; i < n; ++i)
    if (cosines[i] < 0.5) {
      sub_c.push_back(cosines[i]);
      sub_m.push_back(mses[i]);
    }
  REQUIRE(sub_c.size() > 50);
  CHECK(testutil::spearman(sub_c, sub_m) > 0.95);

  double indep = 0.0;
  for (int i = 0; i < n; ++i)
    indep += cosine_loss(base[i], base[(i + 1) % n]);
  CHECK(indep / n == doctest::Approx(1.0).epsilon(0.05));
}
