#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <vector>

#include <json.hpp>

#include "so3ae/clebsch.hpp"
#include "so3ae/errors.hpp"
#include "so3ae/metrics.hpp"
#include "so3ae/model.hpp"
#include "so3ae/steerable.hpp"
#include "testutil.hpp"

using namespace so3ae;

namespace {

std::string temp_path(const std::string& stem) {
  return (std::filesystem::temp_directory_path() / stem).string();
}

// Independent KNN oracle: full sort of (distance^2, index) pairs, uniform
// votes counted in a map, winner = highest count then smallest class.
std::vector<int> oracle_knn(const Eigen::MatrixXd& tx,
                            const std::vector<int>& ty,
                            const Eigen::MatrixXd& qx, int k) {
  std::vector<int> out;
  for (Eigen::Index q = 0; q < qx.rows(); ++q) {
    std::vector<std::pair<double, int>> all;
    for (Eigen::Index t = 0; t < tx.rows(); ++t)
      all.emplace_back((tx.row(t) - qx.row(q)).squaredNorm(), int(t));
    std::sort(all.begin(), all.end());
    std::map<int, int> votes;
    for (int j = 0; j < k; ++j) ++votes[ty[std::size_t(all[std::size_t(j)].second)]];
    int best_class = -1, best_votes = -1;
    for (const auto& [cls, v] : votes)
      if (v > best_votes) {  // map iterates classes ascending
        best_votes = v;
        best_class = cls;
      }
    out.push_back(best_class);
  }
  return out;
}

// Independent binary logistic regression fitted by Newton-IRLS with a tiny
// ridge term; the closed-form oracle for the linear classifier protocol.
Eigen::VectorXd irls_logistic(const Eigen::MatrixXd& x,
                              const std::vector<int>& y) {
  const Eigen::Index n = x.rows(), d = x.cols() + 1;
  Eigen::MatrixXd xa(n, d);
  xa << x, Eigen::VectorXd::Ones(n);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  for (int iter = 0; iter < 50; ++iter) {
    Eigen::VectorXd eta = xa * w;
    Eigen::VectorXd p = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i = 0; i < n; ++i)
      g += (double(y[std::size_t(i)]) - p(i)) * xa.row(i).transpose();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < n; ++i)
      h += p(i) * (1.0 - p(i)) * xa.row(i).transpose() * xa.row(i);
    h.diagonal().array() += 1e-8;
    const Eigen::VectorXd step = h.ldlt().solve(g);
    w += step;
    if (step.cwiseAbs().maxCoeff() < 1e-10) break;
  }
  return w;
}

// Independent V-measure: conditional entropies computed directly from the
// joint distribution, H(A|B) = -sum p(a,b) log(p(a,b)/p(b)).
double oracle_v_measure(const std::vector<int>& cluster,
                        const std::vector<int>& label) {
  const double n = double(cluster.size());
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> pc, pl;
  for (std::size_t i = 0; i < cluster.size(); ++i) {
    joint[{cluster[i], label[i]}] += 1.0 / n;
    pc[cluster[i]] += 1.0 / n;
    pl[label[i]] += 1.0 / n;
  }
  double h_l = 0, h_c = 0, h_l_given_c = 0, h_c_given_l = 0;
  for (const auto& [l, p] : pl) (void)l, h_l -= p * std::log(p);
  for (const auto& [c, p] : pc) (void)c, h_c -= p * std::log(p);
  for (const auto& [key, p] : joint) {
    h_l_given_c -= p * std::log(p / pc[key.first]);
    h_c_given_l -= p * std::log(p / pl[key.second]);
  }
  const double hom = h_l <= 0 ? 1.0 : 1.0 - h_l_given_c / h_l;
  const double com = h_c <= 0 ? 1.0 : 1.0 - h_c_given_l / h_c;
  return hom + com <= 0 ? 0.0 : 2 * hom * com / (hom + com);
}

// Gaussian blobs around the given centers, `per` points each; returns the
// sample matrix and the blob index of every row.
std::pair<Eigen::MatrixXd, std::vector<int>> make_blobs(
    const std::vector<Eigen::VectorXd>& centers, int per, double sigma,
    std::mt19937_64& rng) {
  const Eigen::Index d = centers.front().size();
  Eigen::MatrixXd x(Eigen::Index(centers.size()) * per, d);
  std::vector<int> y;
  std::normal_distribution<double> noise(0.0, sigma);
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < centers.size(); ++c)
    for (int i = 0; i < per; ++i, ++row) {
      for (Eigen::Index j = 0; j < d; ++j)
        x(row, j) = centers[c](j) + noise(rng);
      y.push_back(int(c));
    }
  return {x, y};
}

ModelConfig audit_config() {
  ModelConfig cfg;
  cfg.blocks = 2;
  cfg.degrees = {2, 1};
  cfg.channels = {4, 3};
  cfg.z = 3;
  cfg.c_init = 4;
  cfg.variational = false;
  cfg.input_signature = TensorSignature({{0, 3}, {1, 2}, {2, 2}});
  cfg.validate();
  return cfg;
}

ModelParams fresh_params(const Model& m, std::uint64_t seed) {
  ModelParams p = m.make_params();
  std::mt19937_64 rng(seed);
  m.init_params(p, rng);
  return p;
}

// Rebuilds a CG table with one matrix element of the (1, 1, 2) block
// perturbed, by editing the serialized form. The perturbed block is no
// longer an intertwiner, so any model using it must fail an audit.
CGCache corrupted_cache(int l_max) {
  CGCache clean = CGCache::build(l_max);
  const std::string path = temp_path("so3ae_corrupt_cg.bin");
  clean.save(path);

  std::ifstream is(path, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)),
                          std::istreambuf_iterator<char>());
  is.close();

  auto u16_at = [&](std::size_t off) {
    std::uint16_t v;
    std::memcpy(&v, bytes.data() + off, 2);
    return v;
  };
  std::uint32_t count;
  std::memcpy(&count, bytes.data() + 8, 4);
  std::size_t off = 12;
  bool done = false;
  for (std::uint32_t t = 0; t < count && !done; ++t) {
    const int l1 = u16_at(off), l2 = u16_at(off + 2), l3 = u16_at(off + 4);
    const std::size_t dense =
        std::size_t(2 * l1 + 1) * (2 * l2 + 1) * (2 * l3 + 1);
    if (l1 == 1 && l2 == 1 && l3 == 2) {
      double v;
      std::memcpy(&v, bytes.data() + off + 6, 8);
      v += 0.5;
      std::memcpy(bytes.data() + off + 6, &v, 8);
      done = true;
    }
    off += 6 + 8 * dense;
  }
  REQUIRE(done);

  std::ofstream os(path, std::ios::binary);
  os.write(bytes.data(), std::streamsize(bytes.size()));
  os.close();
  CGCache bad = CGCache::load(path);
  std::filesystem::remove(path);
  return bad;
}

}  // namespace

TEST_CASE("knn: pinned behavior and input validation") {
  Eigen::MatrixXd train(4, 2);
  train << 0, 0, 0, 1, 5, 5, 5, 6;
  const std::vector<int> labels = {0, 0, 1, 1};

  SUBCASE("a test point equal to a training point recovers its label at k=1") {
    Eigen::MatrixXd q(2, 2);
    q << 5, 5, 0, 1;
    CHECK(knn_classify(train, labels, q, 1) == std::vector<int>{1, 0});
  }
  SUBCASE("two separated clusters classify perfectly") {
    std::mt19937_64 rng(7);
    auto [x, y] = make_blobs({Eigen::Vector2d(0, 0), Eigen::Vector2d(20, 0)},
                             30, 0.5, rng);
    auto [qx, qy] = make_blobs({Eigen::Vector2d(0, 0), Eigen::Vector2d(20, 0)},
                               10, 0.5, rng);
    CHECK(accuracy(knn_classify(x, y, qx, 5), qy) == 1.0);
  }
  SUBCASE("vote ties resolve to the smallest class index") {
    Eigen::MatrixXd tr(2, 1);
    tr << -1, 1;
    Eigen::MatrixXd q(1, 1);
    q << 0;  // equidistant from one class-2 and one class-1 point
    CHECK(knn_classify(tr, {2, 1}, q, 2) == std::vector<int>{1});
    CHECK(knn_classify(tr, {0, 2}, q, 2) == std::vector<int>{0});
  }
  SUBCASE("validation") {
    Eigen::MatrixXd empty(0, 2), q(1, 2);
    q << 0, 0;
    CHECK_THROWS_AS(knn_classify(empty, {}, q, 1), Error);
    CHECK_THROWS_AS(knn_classify(train, labels, q, 0), Error);
    CHECK_THROWS_AS(knn_classify(train, labels, q, 5), Error);
    CHECK_THROWS_AS(knn_classify(train, {0, 0, 1}, q, 1), Error);
    Eigen::MatrixXd wrong(1, 3);
    wrong << 0, 0, 0;
    CHECK_THROWS_AS(knn_classify(train, labels, wrong, 1), Error);
    CHECK_THROWS_AS(knn_classify(train, {0, 0, -1, 1}, q, 1), Error);
  }
}

TEST_CASE("knn: agreement with the brute-force oracle on random data") {
  std::mt19937_64 rng(2026);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> cls(0, 2);
  Eigen::MatrixXd train(120, 6), test(80, 6);
  std::vector<int> labels;
  for (Eigen::Index i = 0; i < train.rows(); ++i) {
    for (Eigen::Index j = 0; j < 6; ++j) train(i, j) = g(rng);
    labels.push_back(cls(rng));
  }
  for (Eigen::Index i = 0; i < test.rows(); ++i)
    for (Eigen::Index j = 0; j < 6; ++j) test(i, j) = g(rng);

  for (int k : {1, 3, 5, 7})
    CHECK(knn_classify(train, labels, test, k) ==
          oracle_knn(train, labels, test, k));
}

TEST_CASE("knn: invariant under a shared orthogonal transform") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd train(40, 5), test(15, 5), raw(5, 5);
  std::vector<int> labels;
  std::uniform_int_distribution<int> cls(0, 3);
  for (Eigen::Index i = 0; i < train.rows(); ++i) {
    for (Eigen::Index j = 0; j < 5; ++j) train(i, j) = g(rng);
    labels.push_back(cls(rng));
  }
  for (Eigen::Index i = 0; i < test.rows(); ++i)
    for (Eigen::Index j = 0; j < 5; ++j) test(i, j) = g(rng);
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 5; ++j) raw(i, j) = g(rng);
  const Eigen::MatrixXd q =
      Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ();

  const auto base = knn_classify(train, labels, test, 5);
  const auto rotated =
      knn_classify(train * q.transpose(), labels, test * q.transpose(), 5);
  CHECK(base == rotated);
}

TEST_CASE("linear classifier: separable data, determinism, degenerate set") {
  std::mt19937_64 rng(5);
  auto [x, y] = make_blobs({Eigen::Vector2d(-4, 0), Eigen::Vector2d(4, 0)},
                           40, 0.6, rng);

  SUBCASE("linearly separable classes reach perfect accuracy") {
    auto clf = train_linear_classifier(x, y, 2, 99);
    CHECK_FALSE(clf.degenerate);
    CHECK(accuracy(clf.predict(x), y) == 1.0);
  }
  SUBCASE("consistent feature permutation leaves predictions unchanged") {
    Eigen::MatrixXd xp(x.rows(), 2);
    xp.col(0) = x.col(1);
    xp.col(1) = x.col(0);
    CHECK(linear_classify(x, y, x, 2, 42) == linear_classify(xp, y, xp, 2, 42));
  }
  SUBCASE("fixed seed reproduces the trained weights bitwise") {
    auto a = train_linear_classifier(x, y, 2, 7);
    auto b = train_linear_classifier(x, y, 2, 7);
    CHECK(a.w == b.w);
    CHECK(a.b == b.b);
  }
  SUBCASE("single-class training sets degrade to a constant prediction") {
    std::vector<int> ones(y.size(), 1);
    auto clf = train_linear_classifier(x, ones, 3, 0);
    CHECK(clf.degenerate);
    CHECK(clf.constant_class == 1);
    const auto pred = clf.predict(x);
    CHECK(std::all_of(pred.begin(), pred.end(),
                      [](int p) { return p == 1; }));
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(train_linear_classifier(Eigen::MatrixXd(0, 2), {}, 2),
                    Error);
    CHECK_THROWS_AS(train_linear_classifier(x, y, 1), Error);  // label 1 >= 1
    std::vector<int> bad = y;
    bad[0] = -1;
    CHECK_THROWS_AS(train_linear_classifier(x, bad, 2), Error);
  }
}

TEST_CASE("linear classifier: matches an IRLS logistic-regression oracle") {
  // Overlapping Gaussians so neither method saturates at 1.0.
  std::mt19937_64 rng(31);
  auto [x, y] = make_blobs({Eigen::Vector4d(-1, 0.5, -0.5, 0.2),
                            Eigen::Vector4d(1, -0.5, 0.5, -0.2)},
                           250, 1.4, rng);

  const Eigen::VectorXd w = irls_logistic(x, y);
  std::vector<int> oracle_pred;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    oracle_pred.push_back(x.row(i).dot(w.head(4)) + w(4) > 0 ? 1 : 0);
  const double oracle_acc = accuracy(oracle_pred, y);

  const double acc = accuracy(linear_classify(x, y, x, 2, 3), y);
  CHECK(oracle_acc > 0.7);  // the set is genuinely non-trivial
  CHECK(oracle_acc < 1.0);
  CHECK(std::abs(acc - oracle_acc) <= 0.02);
}

TEST_CASE("kmeans: recovers separated blobs and is deterministic") {
  std::mt19937_64 rng(13);
  auto [x, y] = make_blobs({Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(12, 0, 0),
                            Eigen::Vector3d(0, 12, 0)},
                           25, 0.8, rng);
  const KMeansResult a = kmeans(x, 3, 77);
  CHECK(purity(a.assignment, y) == 1.0);
  CHECK(a.centroids.rows() == 3);
  CHECK(std::isfinite(a.inertia));

  const KMeansResult b = kmeans(x, 3, 77);
  CHECK(a.assignment == b.assignment);
  CHECK(a.inertia == b.inertia);

  CHECK_THROWS_AS(kmeans(x, 0, 1), Error);
  CHECK_THROWS_AS(kmeans(x, int(x.rows()) + 1, 1), Error);
  CHECK_THROWS_AS(kmeans(Eigen::MatrixXd(0, 3), 1, 1), Error);
}

TEST_CASE("purity: pinned values, random-assignment baseline, relabeling") {
  SUBCASE("identical partitions have purity 1") {
    const std::vector<int> c = {0, 0, 1, 1, 2, 2};
    CHECK(purity(c, c) == 1.0);
    // ... under any relabeling of either side
    const std::vector<int> shifted = {5, 5, 3, 3, 9, 9};
    CHECK(purity(shifted, c) == 1.0);
    CHECK(purity(c, shifted) == 1.0);
  }
  SUBCASE("a 60/40 mixed cluster scores 0.6") {
    std::vector<int> cluster(10, 0), label;
    for (int i = 0; i < 6; ++i) label.push_back(0);
    for (int i = 0; i < 4; ++i) label.push_back(1);
    CHECK(purity(cluster, label) == doctest::Approx(0.6).epsilon(1e-12));
  }
  SUBCASE("random 10-way assignment on balanced classes scores near 0.1") {
    std::mt19937_64 rng(404);
    std::uniform_int_distribution<int> ten(0, 9);
    std::vector<int> cluster, label;
    for (int i = 0; i < 10000; ++i) {
      cluster.push_back(ten(rng));
      label.push_back(i % 10);
    }
    const double p = purity(cluster, label);
    CHECK(p > 0.08);
    CHECK(p < 0.13);
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(purity({}, {}), Error);
    CHECK_THROWS_AS(purity({0, 1}, {0}), Error);
    CHECK_THROWS_AS(purity({0, -1}, {0, 0}), Error);
  }
}

TEST_CASE("v_measure: pinned cases and independent reimplementation") {
  SUBCASE("perfect clustering scores 1; one catch-all cluster scores 0") {
    const std::vector<int> l = {0, 0, 1, 1};
    CHECK(v_measure({1, 1, 0, 0}, l) == doctest::Approx(1.0).epsilon(1e-12));
    const double v = v_measure({0, 0, 0, 0}, l);
    CHECK(v < 1.0);  // completeness is 1 but homogeneity collapses
    CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("agrees with a direct joint-distribution formulation") {
    std::mt19937_64 rng(555);
    for (int trial = 0; trial < 50; ++trial) {
      std::uniform_int_distribution<int> nc(1, 6), size(5, 60);
      const int n = size(rng);
      std::uniform_int_distribution<int> ck(0, nc(rng)), lk(0, nc(rng));
      std::vector<int> c, l;
      for (int i = 0; i < n; ++i) {
        c.push_back(ck(rng));
        l.push_back(lk(rng));
      }
      const double v = v_measure(c, l);
      CHECK(v == doctest::Approx(oracle_v_measure(c, l)).epsilon(1e-10));
      CHECK(v >= 0.0);
      CHECK(v <= 1.0 + 1e-12);
    }
  }
  SUBCASE("invariant under relabeling permutations of both sides") {
    std::mt19937_64 rng(808);
    std::uniform_int_distribution<int> k(0, 4);
    std::vector<int> c, l;
    for (int i = 0; i < 200; ++i) {
      c.push_back(k(rng));
      l.push_back(k(rng));
    }
    std::vector<int> perm = {3, 0, 4, 1, 2};
    std::vector<int> cp, lp;
    for (int v : c) cp.push_back(perm[std::size_t(v)]);
    for (int v : l) lp.push_back(perm[std::size_t(v)]);
    CHECK(v_measure(cp, lp) == doctest::Approx(v_measure(c, l)).epsilon(1e-12));
    CHECK(purity(cp, lp) == doctest::Approx(purity(c, l)).epsilon(1e-12));
  }
}

TEST_CASE("per_degree_mse: zero on identity and partitions the total error") {
  const TensorSignature sig({{0, 3}, {1, 2}, {3, 4}});
  std::mt19937_64 rng(101);
  const SteerableTensor x = random_tensor(sig, rng);
  const SteerableTensor y = random_tensor(sig, rng);

  CHECK(per_degree_mse(x, x).cwiseAbs().maxCoeff() == 0.0);

  const Eigen::VectorXd per = per_degree_mse(x, y);
  REQUIRE(per.size() == 3);
  double weighted = 0.0;
  for (int i = 0; i < 3; ++i) {
    const auto& part = sig.parts()[std::size_t(i)];
    weighted += per(i) * double(part.channels * (2 * part.degree + 1));
  }
  const double total = mse(x, y) * double(sig.coeff_count());
  CHECK(weighted == doctest::Approx(total).epsilon(1e-12));

  const TensorSignature other({{0, 3}});
  CHECK_THROWS_AS(per_degree_mse(x, random_tensor(other, rng)), Error);
}

TEST_CASE("equivariance audit: fresh model passes, corrupted table fails") {
  const ModelConfig cfg = audit_config();
  const Model model(cfg);
  const ModelParams params = fresh_params(model, 2024);

  const AuditResult good = equivariance_audit(model, params, 8, 1e-5, 42);
  CHECK(good.pass);
  CHECK(good.trials == 8);
  CHECK(good.invariant_residual <= 1e-5);
  CHECK(good.frame_residual <= 1e-5);
  CHECK(good.decode_residual <= 1e-5);
  CHECK(good.reconstruct_residual <= 1e-5);

  SUBCASE("deterministic under a fixed seed") {
    const AuditResult again = equivariance_audit(model, params, 8, 1e-5, 42);
    CHECK(again.invariant_residual == good.invariant_residual);
    CHECK(again.frame_residual == good.frame_residual);
    CHECK(again.decode_residual == good.decode_residual);
    CHECK(again.reconstruct_residual == good.reconstruct_residual);
  }
  SUBCASE("a single perturbed coupling coefficient is caught") {
    const Model broken(cfg, corrupted_cache(cfg.input_signature.max_degree()));
    const ModelParams bp = fresh_params(broken, 2024);
    const AuditResult bad = equivariance_audit(broken, bp, 8, 1e-5, 42);
    CHECK_FALSE(bad.pass);
    const double worst =
        std::max({bad.invariant_residual, bad.frame_residual,
                  bad.decode_residual, bad.reconstruct_residual});
    CHECK(worst > 1e-3);
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(equivariance_audit(model, params, 0, 1e-5, 1), Error);
    CHECK_THROWS_AS(equivariance_audit(model, params, 4, 0.0, 1), Error);
  }
}

TEST_CASE("fold assignment: stable hash, full coverage, bounded range") {
  CHECK(fold_of("sample-001") == fold_of("sample-001"));
  std::set<int> seen;
  for (int i = 0; i < 100; ++i) {
    const int f = fold_of("id" + std::to_string(i));
    CHECK(f >= 0);
    CHECK(f < 5);
    seen.insert(f);
  }
  CHECK(seen.size() == 5);  // 100 ids reach every fold
  CHECK(fold_of("x", 2) < 2);
  CHECK_THROWS_AS(fold_of("x", 0), Error);
}

TEST_CASE("cross-validated latent accuracy on separated embeddings") {
  std::mt19937_64 rng(33);
  auto [x, y] = make_blobs({Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(10, 0, 0),
                            Eigen::Vector3d(0, 10, 0)},
                           30, 0.7, rng);
  std::vector<std::string> ids;
  for (int i = 0; i < 90; ++i) ids.push_back("s" + std::to_string(i));

  const CvAccuracy acc = cv_latent_accuracy(x, ids, y, 3, 5, 1);
  CHECK(acc.knn >= 0.95);
  CHECK(acc.linear >= 0.95);

  const ClusterScores cs = cluster_scores(x, y, 3, 9);
  CHECK(cs.purity >= 0.95);
  CHECK(cs.v_measure >= 0.8);
  CHECK(cs.purity <= 1.0);
  CHECK(cs.v_measure <= 1.0);
}

TEST_CASE("recon_stats: closed-form check on a two-pair batch") {
  const TensorSignature sig({{0, 2}, {1, 1}});
  std::mt19937_64 rng(71);
  std::vector<SteerableTensor> orig = {random_tensor(sig, rng),
                                       random_tensor(sig, rng)};
  std::vector<SteerableTensor> rec = {random_tensor(sig, rng),
                                      random_tensor(sig, rng)};

  const ReconStats s = recon_stats(orig, rec);
  CHECK(s.count == 2);
  CHECK(s.degrees == std::vector<int>{0, 1});

  const double c0 = cosine_or_default(orig[0], rec[0]);
  const double c1 = cosine_or_default(orig[1], rec[1]);
  CHECK(s.cosine_mean == doctest::Approx(0.5 * (c0 + c1)).epsilon(1e-12));
  const double mean = 0.5 * (c0 + c1);
  const double sd = std::sqrt((c0 - mean) * (c0 - mean) +
                              (c1 - mean) * (c1 - mean));  // n-1 = 1
  CHECK(s.cosine_sd == doctest::Approx(sd).epsilon(1e-9));
  CHECK(s.mse_mean ==
        doctest::Approx(0.5 * (mse(orig[0], rec[0]) + mse(orig[1], rec[1])))
            .epsilon(1e-12));
  const Eigen::VectorXd per0 = per_degree_mse(orig[0], rec[0]);
  const Eigen::VectorXd per1 = per_degree_mse(orig[1], rec[1]);
  CHECK(s.per_degree[0] ==
        doctest::Approx(0.5 * (per0(0) + per1(0))).epsilon(1e-12));
  CHECK(s.per_degree[1] ==
        doctest::Approx(0.5 * (per0(1) + per1(1))).epsilon(1e-12));

  SUBCASE("identical pairs: zero error, zero spread") {
    const ReconStats id = recon_stats(orig, orig);
    CHECK(id.cosine_mean == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(id.cosine_sd == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(id.mse_mean == 0.0);
  }
  SUBCASE("degenerate operands use the substitution rule") {
    const SteerableTensor zero(sig);
    CHECK(cosine_or_default(zero, zero) == 0.0);
    CHECK(cosine_or_default(zero, orig[0]) == 1.0);
    CHECK(cosine_or_default(orig[0], zero) == 1.0);
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(recon_stats({}, {}), Error);
    CHECK_THROWS_AS(recon_stats(orig, {rec[0]}), Error);
  }
}

TEST_CASE("evaluation report: JSON structure and embeddings CSV") {
  EvalReport report;
  report.recon.count = 4;
  report.recon.cosine_mean = 0.12;
  report.recon.cosine_sd = 0.03;
  report.recon.mse_mean = 0.5;
  report.recon.degrees = {0, 1};
  report.recon.per_degree = {0.25, 0.75};
  report.has_labels = true;
  report.accuracy = {0.9, 0.85};
  report.clustering = {0.8, 0.7};
  report.has_audit = true;
  report.audit.trials = 5;
  report.audit.tolerance = 1e-5;
  report.audit.invariant_residual = 1e-7;
  report.audit.frame_residual = 2e-7;
  report.audit.decode_residual = 3e-7;
  report.audit.reconstruct_residual = 4e-7;
  report.audit.pass = true;

  const nlohmann::json j = nlohmann::json::parse(report.to_json());
  CHECK(j["reconstruction"]["count"] == 4);
  CHECK(j["reconstruction"]["per_degree_mse"].size() == 2);
  CHECK(j["reconstruction"]["per_degree_mse"][1]["degree"] == 1);
  CHECK(j["latent"]["knn_accuracy"] == doctest::Approx(0.9));
  CHECK(j["latent"]["purity"] == doctest::Approx(0.8));
  CHECK(j["audit"]["pass"] == true);

  SUBCASE("absent sections serialize as null") {
    EvalReport bare;
    bare.recon = report.recon;
    const nlohmann::json b = nlohmann::json::parse(bare.to_json());
    CHECK(b["latent"].is_null());
    CHECK(b["audit"].is_null());
  }
  SUBCASE("report file and embeddings CSV round out on disk") {
    const std::string rp = temp_path("so3ae_eval_report.json");
    write_eval_report(report, rp);
    std::ifstream is(rp);
    const nlohmann::json back = nlohmann::json::parse(is);
    CHECK(back["reconstruction"]["mse"] == doctest::Approx(0.5));
    std::filesystem::remove(rp);

    Eigen::MatrixXd emb(2, 3);
    emb << 1, 2, 3, 4, 5, 0.125;
    const std::vector<std::string> ids = {"a", "b"};
    const std::vector<std::string> labels = {"cat", "dog"};
    const std::string cp = temp_path("so3ae_embeddings.csv");
    write_embeddings_csv(ids, emb, &labels, cp);
    std::ifstream cs(cp);
    std::string line;
    std::getline(cs, line);
    CHECK(line == "id,z0,z1,z2,label");
    std::getline(cs, line);
    CHECK(line == "a,1,2,3,cat");
    std::getline(cs, line);
    CHECK(line == "b,4,5,0.125,dog");
    CHECK_FALSE(std::getline(cs, line));
    std::filesystem::remove(cp);

    CHECK_THROWS_AS(
        write_embeddings_csv({"bad,id"}, Eigen::MatrixXd(1, 1), nullptr, cp),
        Error);
  }
}
