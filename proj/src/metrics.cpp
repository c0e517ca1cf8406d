#include "so3ae/metrics.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <utility>

#include <json.hpp>

#include "so3ae/errors.hpp"
#include "so3ae/optim.hpp"
#include "so3ae/rotation.hpp"
#include "so3ae/tape.hpp"
#include "so3ae/tensor_io.hpp"

namespace so3ae {
namespace {

// splitmix64 finalizer; decorrelates seed/epoch and seed/trial combinations.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::mt19937_64 subseed_rng(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(mix64(seed ^ mix64(index + 1)));
}

void check_labels(const std::vector<int>& y, const char* what) {
  for (int v : y)
    if (v < 0)
      fail(ErrorKind::InvalidArgument,
           std::string(what) + ": negative class label " + std::to_string(v));
}

int max_label(const std::vector<int>& y) {
  int m = -1;
  for (int v : y) m = std::max(m, v);
  return m;
}

double flat_max_abs_diff(const SteerableTensor& a, const SteerableTensor& b) {
  const std::vector<double> fa = a.to_flat();
  const std::vector<double> fb = b.to_flat();
  if (fa.size() != fb.size())
    fail(ErrorKind::Shape, "residual: signature mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i)
    m = std::max(m, std::abs(fa[i] - fb[i]));
  return m;
}

Frame rotate_frame(const Frame& f, const Rotation& r) {
  const Eigen::Matrix3d m = r.matrix();
  return Frame{m * f.e1, m * f.e2, m * f.e3};
}

// Uniform random rotation via normalized quaternions (Marsaglia).
Rotation audit_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return Rotation(q.toRotationMatrix());
}

}  // namespace

// ---------------------------------------------------------------------------
// KNN
// ---------------------------------------------------------------------------

std::vector<int> knn_classify(const Eigen::MatrixXd& train_x,
                              const std::vector<int>& train_y,
                              const Eigen::MatrixXd& test_x, int k) {
  const Eigen::Index n = train_x.rows();
  if (n == 0)
    fail(ErrorKind::InvalidArgument, "knn_classify: empty training set");
  if (Eigen::Index(train_y.size()) != n)
    fail(ErrorKind::Shape, "knn_classify: " + std::to_string(n) +
                               " training rows but " +
                               std::to_string(train_y.size()) + " labels");
  if (test_x.cols() != train_x.cols())
    fail(ErrorKind::Shape,
         "knn_classify: train dimension " + std::to_string(train_x.cols()) +
             " != test dimension " + std::to_string(test_x.cols()));
  if (k < 1 || Eigen::Index(k) > n)
    fail(ErrorKind::InvalidArgument,
         "knn_classify: k = " + std::to_string(k) +
             " must lie in [1, " + std::to_string(n) + "]");
  check_labels(train_y, "knn_classify");

  const int n_classes = max_label(train_y) + 1;
  std::vector<int> out(std::size_t(test_x.rows()), 0);
  std::vector<std::pair<double, int>> cand(static_cast<std::size_t>(n));
  std::vector<int> votes(std::size_t(n_classes), 0);
  for (Eigen::Index i = 0; i < test_x.rows(); ++i) {
    for (Eigen::Index j = 0; j < n; ++j)
      cand[std::size_t(j)] = {
          (train_x.row(j) - test_x.row(i)).squaredNorm(), int(j)};
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    std::fill(votes.begin(), votes.end(), 0);
    for (int j = 0; j < k; ++j) {
      const int neighbour = cand[std::size_t(j)].second;
      ++votes[std::size_t(train_y[std::size_t(neighbour)])];
    }
    int best = 0;
    for (int c = 1; c < n_classes; ++c)
      if (votes[std::size_t(c)] > votes[std::size_t(best)]) best = c;
    out[std::size_t(i)] = best;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear classifier
// ---------------------------------------------------------------------------

namespace {

// Row-wise softmax cross entropy of logits against integer targets.
double cross_entropy(const Eigen::MatrixXd& x, const std::vector<int>& y,
                     const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
  Eigen::MatrixXd logits = (x * w).rowwise() + b.transpose();
  double ce = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse =
        mx + std::log((logits.row(i).array() - mx).exp().sum());
    ce += lse - logits(i, y[std::size_t(i)]);
  }
  return ce / double(logits.rows());
}

}  // namespace

int LinearClassifier::predict(const Eigen::VectorXd& x) const {
  if (degenerate) return constant_class;
  if (x.size() != w.rows())
    fail(ErrorKind::Shape, "LinearClassifier: input dimension " +
                               std::to_string(x.size()) + " != " +
                               std::to_string(w.rows()));
  Eigen::VectorXd logits = w.transpose() * x + b;
  int best = 0;
  for (Eigen::Index c = 1; c < logits.size(); ++c)
    if (logits(c) > logits(best)) best = int(c);
  return best;
}

std::vector<int> LinearClassifier::predict(const Eigen::MatrixXd& x) const {
  std::vector<int> out(std::size_t(x.rows()), constant_class);
  if (degenerate) return out;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    out[std::size_t(i)] = predict(Eigen::VectorXd(x.row(i).transpose()));
  return out;
}

LinearClassifier train_linear_classifier(const Eigen::MatrixXd& train_x,
                                         const std::vector<int>& train_y,
                                         int num_classes, std::uint64_t seed,
                                         const Eigen::MatrixXd* val_x,
                                         const std::vector<int>* val_y) {
  const Eigen::Index n = train_x.rows();
  const Eigen::Index dim = train_x.cols();
  if (n == 0)
    fail(ErrorKind::InvalidArgument,
         "train_linear_classifier: empty training set");
  if (Eigen::Index(train_y.size()) != n)
    fail(ErrorKind::Shape, "train_linear_classifier: " + std::to_string(n) +
                               " rows but " + std::to_string(train_y.size()) +
                               " labels");
  if (num_classes < 1)
    fail(ErrorKind::InvalidArgument,
         "train_linear_classifier: num_classes must be positive");
  check_labels(train_y, "train_linear_classifier");
  if (max_label(train_y) >= num_classes)
    fail(ErrorKind::InvalidArgument,
         "train_linear_classifier: label " +
             std::to_string(max_label(train_y)) + " out of range for " +
             std::to_string(num_classes) + " classes");
  if ((val_x == nullptr) != (val_y == nullptr))
    fail(ErrorKind::InvalidArgument,
         "train_linear_classifier: validation inputs and labels must be "
         "supplied together");
  if (val_x && (val_x->rows() != Eigen::Index(val_y->size()) ||
                val_x->cols() != dim))
    fail(ErrorKind::Shape,
         "train_linear_classifier: validation set shape mismatch");

  LinearClassifier clf;
  clf.w = Eigen::MatrixXd::Zero(dim, num_classes);
  clf.b = Eigen::VectorXd::Zero(num_classes);

  const int distinct = int(std::set<int>(train_y.begin(), train_y.end())
                               .size());
  if (distinct < 2) {
    clf.degenerate = true;
    clf.constant_class = train_y.front();
    return clf;
  }

  ParamStore store;
  store.add_segment("w", std::size_t(dim) * std::size_t(num_classes));
  store.add_segment("b", std::size_t(num_classes));
  AdamState adam = AdamState::init(store.size());

  const Eigen::MatrixXd& vx = val_x ? *val_x : train_x;
  const std::vector<int>& vy = val_y ? *val_y : train_y;

  constexpr int kEpochs = 250;
  constexpr int kBatch = 100;
  constexpr int kPatience = 10;
  double lr = 0.01;
  double best_val = std::numeric_limits<double>::infinity();
  int stale = 0;

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const std::size_t w_off = store.segment_info("w").offset;
  const std::size_t b_off = store.segment_info("b").offset;
  Eigen::Map<Eigen::MatrixXd> w_map(store.value_ptr(w_off), dim, num_classes);
  Eigen::Map<Eigen::VectorXd> b_map(store.value_ptr(b_off), num_classes);

  for (int epoch = 0; epoch < kEpochs; ++epoch) {
    auto rng = subseed_rng(seed, std::uint64_t(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += kBatch) {
      const Eigen::Index bs = std::min<Eigen::Index>(kBatch, n - start);
      Eigen::MatrixXd xb(bs, dim);
      std::vector<int> yb(static_cast<std::size_t>(bs), 0);
      for (Eigen::Index r = 0; r < bs; ++r) {
        const int src = order[std::size_t(start + r)];
        xb.row(r) = train_x.row(src);
        yb[std::size_t(r)] = train_y[std::size_t(src)];
      }
      Eigen::MatrixXd logits = (xb * w_map).rowwise() + b_map.transpose();
      Eigen::MatrixXd p(bs, num_classes);
      for (Eigen::Index r = 0; r < bs; ++r) {
        const double mx = logits.row(r).maxCoeff();
        p.row(r) = (logits.row(r).array() - mx).exp();
        p.row(r) /= p.row(r).sum();
        p(r, yb[std::size_t(r)]) -= 1.0;
      }
      p /= double(bs);
      store.zero_grad();
      Eigen::Map<Eigen::MatrixXd> gw(store.grad_ptr(w_off), dim, num_classes);
      Eigen::Map<Eigen::VectorXd> gb(store.grad_ptr(b_off), num_classes);
      gw = xb.transpose() * p;
      gb = p.colwise().sum().transpose();
      adam_step(store, adam, lr);
    }
    const double val_ce = cross_entropy(vx, vy, w_map, b_map);
    if (val_ce < best_val) {
      best_val = val_ce;
      stale = 0;
    } else if (++stale >= kPatience) {
      lr *= 0.1;
      stale = 0;
    }
  }

  clf.w = w_map;
  clf.b = b_map;
  return clf;
}

std::vector<int> linear_classify(const Eigen::MatrixXd& train_x,
                                 const std::vector<int>& train_y,
                                 const Eigen::MatrixXd& test_x, int num_classes,
                                 std::uint64_t seed) {
  if (test_x.cols() != train_x.cols())
    fail(ErrorKind::Shape,
         "linear_classify: train dimension " + std::to_string(train_x.cols()) +
             " != test dimension " + std::to_string(test_x.cols()));
  return train_linear_classifier(train_x, train_y, num_classes, seed)
      .predict(test_x);
}

double accuracy(const std::vector<int>& predicted,
                const std::vector<int>& truth) {
  if (predicted.size() != truth.size())
    fail(ErrorKind::Shape, "accuracy: " + std::to_string(predicted.size()) +
                               " predictions vs " +
                               std::to_string(truth.size()) + " labels");
  if (predicted.empty())
    fail(ErrorKind::InvalidArgument, "accuracy: empty prediction set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] == truth[i]) ++hits;
  return double(hits) / double(predicted.size());
}

// ---------------------------------------------------------------------------
// k-means
// ---------------------------------------------------------------------------

namespace {

// k-means++ seeding: subsequent centroids are sampled with probability
// proportional to the squared distance to the nearest centroid chosen so far.
Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& x, int k,
                              std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd c(k, x.cols());
  std::uniform_int_distribution<Eigen::Index> uni(0, n - 1);
  c.row(0) = x.row(uni(rng));
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i)
    d2(i) = (x.row(i) - c.row(0)).squaredNorm();
  for (int j = 1; j < k; ++j) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> ur(0.0, total);
      double r = ur(rng);
      for (Eigen::Index i = 0; i < n; ++i) {
        r -= d2(i);
        if (r <= 0.0) {
          pick = i;
          break;
        }
        pick = i;  // numeric slack: fall back to the last row
      }
    } else {
      pick = uni(rng);
    }
    c.row(j) = x.row(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      d2(i) = std::min(d2(i), (x.row(i) - c.row(j)).squaredNorm());
  }
  return c;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& x, int k, std::uint64_t seed,
                    int n_init, int max_iter) {
  const Eigen::Index n = x.rows();
  if (n == 0) fail(ErrorKind::InvalidArgument, "kmeans: empty input");
  if (k < 1 || Eigen::Index(k) > n)
    fail(ErrorKind::InvalidArgument,
         "kmeans: k = " + std::to_string(k) + " must lie in [1, " +
             std::to_string(n) + "]");
  if (n_init < 1 || max_iter < 1)
    fail(ErrorKind::InvalidArgument,
         "kmeans: n_init and max_iter must be positive");
  if (!x.allFinite())
    fail(ErrorKind::Numeric, "kmeans: non-finite input coordinates");

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();

  for (int trial = 0; trial < n_init; ++trial) {
    auto rng = subseed_rng(seed, std::uint64_t(trial));
    Eigen::MatrixXd c = kmeanspp_init(x, k, rng);
    std::vector<int> assign(std::size_t(n), -1);
    for (int iter = 0; iter < max_iter; ++iter) {
      bool changed = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        int arg = 0;
        double bd = (x.row(i) - c.row(0)).squaredNorm();
        for (int j = 1; j < k; ++j) {
          const double d = (x.row(i) - c.row(j)).squaredNorm();
          if (d < bd) {
            bd = d;
            arg = j;
          }
        }
        if (assign[std::size_t(i)] != arg) {
          assign[std::size_t(i)] = arg;
          changed = true;
        }
      }
      if (!changed) break;
      Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, x.cols());
      std::vector<Eigen::Index> count(std::size_t(k), 0);
      for (Eigen::Index i = 0; i < n; ++i) {
        sum.row(assign[std::size_t(i)]) += x.row(i);
        ++count[std::size_t(assign[std::size_t(i)])];
      }
      for (int j = 0; j < k; ++j) {
        if (count[std::size_t(j)] > 0) {
          c.row(j) = sum.row(j) / double(count[std::size_t(j)]);
        } else {
          // Empty cluster: restart it at the point farthest from its
          // current centroid so every centroid stays populated.
          Eigen::Index far = 0;
          double fd = -1.0;
          for (Eigen::Index i = 0; i < n; ++i) {
            const double d =
                (x.row(i) - c.row(assign[std::size_t(i)])).squaredNorm();
            if (d > fd) {
              fd = d;
              far = i;
            }
          }
          c.row(j) = x.row(far);
        }
      }
    }
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      inertia += (x.row(i) - c.row(assign[std::size_t(i)])).squaredNorm();
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.assignment = assign;
      best.centroids = c;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Clustering scores
// ---------------------------------------------------------------------------

namespace {

// Contingency counts n[cluster][label] plus marginals, shared by purity and
// v_measure. Values may be arbitrary nonnegative ints; maps keep it sparse.
struct Contingency {
  std::map<int, std::map<int, std::size_t>> joint;
  std::map<int, std::size_t> by_cluster;
  std::map<int, std::size_t> by_label;
  std::size_t n = 0;
};

Contingency contingency(const std::vector<int>& cluster,
                        const std::vector<int>& label, const char* what) {
  if (cluster.size() != label.size())
    fail(ErrorKind::Shape, std::string(what) + ": " +
                               std::to_string(cluster.size()) +
                               " cluster ids vs " +
                               std::to_string(label.size()) + " labels");
  if (cluster.empty())
    fail(ErrorKind::InvalidArgument, std::string(what) + ": empty input");
  check_labels(cluster, what);
  check_labels(label, what);
  Contingency t;
  t.n = cluster.size();
  for (std::size_t i = 0; i < cluster.size(); ++i) {
    ++t.joint[cluster[i]][label[i]];
    ++t.by_cluster[cluster[i]];
    ++t.by_label[label[i]];
  }
  return t;
}

// Entropy of a count marginal, in nats.
double entropy(const std::map<int, std::size_t>& counts, std::size_t n) {
  double h = 0.0;
  for (const auto& [key, c] : counts) {
    (void)key;
    if (c == 0) continue;
    const double p = double(c) / double(n);
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

double purity(const std::vector<int>& cluster, const std::vector<int>& label) {
  const Contingency t = contingency(cluster, label, "purity");
  std::size_t hits = 0;
  for (const auto& [c, row] : t.joint) {
    (void)c;
    std::size_t mode = 0;
    for (const auto& [l, cnt] : row) {
      (void)l;
      mode = std::max(mode, cnt);
    }
    hits += mode;
  }
  return double(hits) / double(t.n);
}

double v_measure(const std::vector<int>& cluster,
                 const std::vector<int>& label) {
  const Contingency t = contingency(cluster, label, "v_measure");
  const double h_label = entropy(t.by_label, t.n);
  const double h_cluster = entropy(t.by_cluster, t.n);
  // Conditional entropies from the joint counts: H(A|B) = H(A,B) - H(B).
  double h_joint = 0.0;
  for (const auto& [c, row] : t.joint) {
    (void)c;
    for (const auto& [l, cnt] : row) {
      (void)l;
      const double p = double(cnt) / double(t.n);
      h_joint -= p * std::log(p);
    }
  }
  const double h_label_given_cluster = h_joint - h_cluster;
  const double h_cluster_given_label = h_joint - h_label;
  const double hom =
      h_label <= 0.0 ? 1.0 : 1.0 - h_label_given_cluster / h_label;
  const double com =
      h_cluster <= 0.0 ? 1.0 : 1.0 - h_cluster_given_label / h_cluster;
  if (hom + com <= 0.0) return 0.0;
  return 2.0 * hom * com / (hom + com);
}

// ---------------------------------------------------------------------------
// Reconstruction metrics
// ---------------------------------------------------------------------------

Eigen::VectorXd per_degree_mse(const SteerableTensor& x,
                               const SteerableTensor& y) {
  if (!(x.signature() == y.signature()))
    fail(ErrorKind::Shape, "per_degree_mse: signature mismatch");
  const int parts = x.signature().num_parts();
  Eigen::VectorXd out(parts);
  for (int i = 0; i < parts; ++i) {
    const Eigen::MatrixXd d = x.block(i) - y.block(i);
    out(i) = d.squaredNorm() / double(d.size());
  }
  return out;
}

double cosine_or_default(const SteerableTensor& x, const SteerableTensor& y) {
  const double xx = generalized_dot(x, x);
  const double yy = generalized_dot(y, y);
  if (xx <= 0.0 && yy <= 0.0) return 0.0;
  if (xx <= 0.0 || yy <= 0.0) return 1.0;
  return cosine_loss(x, y);
}

// ---------------------------------------------------------------------------
// Equivariance audit
// ---------------------------------------------------------------------------

AuditResult equivariance_audit(const Model& model, const ModelParams& params,
                               int n_trials, double tolerance,
                               std::uint64_t seed) {
  if (n_trials < 1)
    fail(ErrorKind::InvalidArgument,
         "equivariance_audit: n_trials must be positive");
  if (!(tolerance > 0.0))
    fail(ErrorKind::InvalidArgument,
         "equivariance_audit: tolerance must be positive");

  AuditResult r;
  r.trials = n_trials;
  r.tolerance = tolerance;
  for (int t = 0; t < n_trials; ++t) {
    auto rng = subseed_rng(seed, std::uint64_t(t));
    const SteerableTensor x = random_tensor(model.input_signature(), rng);
    const Rotation rot = audit_rotation(rng);
    const SteerableTensor xr = rotate(x, rot);

    const LatentCode a = model.encode(x, params);
    const LatentCode b = model.encode(xr, params);
    r.invariant_residual =
        std::max(r.invariant_residual,
                 (b.invariants - a.invariants).cwiseAbs().maxCoeff());
    r.frame_residual = std::max(
        r.frame_residual,
        (b.frame.as_rotation().matrix() -
         rot.matrix() * a.frame.as_rotation().matrix())
            .cwiseAbs()
            .maxCoeff());

    LatentCode moved = a;
    moved.frame = rotate_frame(a.frame, rot);
    r.decode_residual = std::max(
        r.decode_residual,
        flat_max_abs_diff(model.decode(moved, params),
                          rotate(model.decode(a, params), rot)));
    r.reconstruct_residual = std::max(
        r.reconstruct_residual,
        flat_max_abs_diff(model.reconstruct(xr, params),
                          rotate(model.reconstruct(x, params), rot)));
  }
  r.pass = r.invariant_residual <= tolerance &&
           r.frame_residual <= tolerance && r.decode_residual <= tolerance &&
           r.reconstruct_residual <= tolerance;
  return r;
}

// ---------------------------------------------------------------------------
// Evaluation report
// ---------------------------------------------------------------------------

int fold_of(const std::string& id, int n_folds) {
  if (n_folds < 1)
    fail(ErrorKind::InvalidArgument, "fold_of: fold count must be positive");
  return int(fnv1a64(id) % std::uint64_t(n_folds));
}

ReconStats recon_stats(const std::vector<SteerableTensor>& original,
                       const std::vector<SteerableTensor>& reconstructed) {
  if (original.size() != reconstructed.size())
    fail(ErrorKind::Shape, "recon_stats: " + std::to_string(original.size()) +
                               " originals vs " +
                               std::to_string(reconstructed.size()) +
                               " reconstructions");
  if (original.empty())
    fail(ErrorKind::InvalidArgument, "recon_stats: empty input");

  ReconStats s;
  s.count = int(original.size());
  for (const auto& part : original.front().signature().parts())
    s.degrees.push_back(part.degree);
  Eigen::VectorXd per =
      Eigen::VectorXd::Zero(Eigen::Index(s.degrees.size()));
  double cos_sum = 0.0, cos_sq = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const double c = cosine_or_default(original[i], reconstructed[i]);
    cos_sum += c;
    cos_sq += c * c;
    s.mse_mean += mse(original[i], reconstructed[i]);
    per += per_degree_mse(original[i], reconstructed[i]);
  }
  const double n = double(s.count);
  s.cosine_mean = cos_sum / n;
  s.mse_mean /= n;
  s.cosine_sd =
      s.count < 2
          ? 0.0
          : std::sqrt(std::max(0.0, (cos_sq - cos_sum * cos_sum / n) /
                                        (n - 1.0)));
  per /= n;
  s.per_degree.assign(per.data(), per.data() + per.size());
  return s;
}

CvAccuracy cv_latent_accuracy(const Eigen::MatrixXd& embeddings,
                              const std::vector<std::string>& ids,
                              const std::vector<int>& labels, int num_classes,
                              int k, std::uint64_t seed, int n_folds) {
  const Eigen::Index n = embeddings.rows();
  if (n == 0)
    fail(ErrorKind::InvalidArgument, "cv_latent_accuracy: empty embedding set");
  if (Eigen::Index(ids.size()) != n || Eigen::Index(labels.size()) != n)
    fail(ErrorKind::Shape,
         "cv_latent_accuracy: ids/labels must match the embedding rows");
  if (n_folds < 2)
    fail(ErrorKind::InvalidArgument,
         "cv_latent_accuracy: need at least 2 folds");
  check_labels(labels, "cv_latent_accuracy");

  std::vector<int> fold(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i)
    fold[std::size_t(i)] = fold_of(ids[std::size_t(i)], n_folds);

  std::size_t knn_hits = 0, lin_hits = 0, total = 0;
  for (int f = 0; f < n_folds; ++f) {
    std::vector<Eigen::Index> test_idx, train_idx;
    for (Eigen::Index i = 0; i < n; ++i)
      (fold[std::size_t(i)] == f ? test_idx : train_idx).push_back(i);
    if (test_idx.empty()) continue;
    if (train_idx.empty())
      fail(ErrorKind::InvalidArgument,
           "cv_latent_accuracy: fold " + std::to_string(f) +
               " holds every sample; the ids hash into a single fold");

    Eigen::MatrixXd tr(Eigen::Index(train_idx.size()), embeddings.cols());
    Eigen::MatrixXd te(Eigen::Index(test_idx.size()), embeddings.cols());
    std::vector<int> try_(train_idx.size()), tey(test_idx.size());
    for (std::size_t i = 0; i < train_idx.size(); ++i) {
      tr.row(Eigen::Index(i)) = embeddings.row(train_idx[i]);
      try_[i] = labels[std::size_t(train_idx[i])];
    }
    for (std::size_t i = 0; i < test_idx.size(); ++i) {
      te.row(Eigen::Index(i)) = embeddings.row(test_idx[i]);
      tey[i] = labels[std::size_t(test_idx[i])];
    }

    const int kk = std::min<int>(k, int(train_idx.size()));
    const std::vector<int> knn_pred = knn_classify(tr, try_, te, kk);
    const std::vector<int> lin_pred = linear_classify(
        tr, try_, te, num_classes, seed ^ mix64(std::uint64_t(f) + 1));
    for (std::size_t i = 0; i < tey.size(); ++i) {
      knn_hits += knn_pred[i] == tey[i];
      lin_hits += lin_pred[i] == tey[i];
    }
    total += tey.size();
  }
  CvAccuracy acc;
  acc.knn = double(knn_hits) / double(total);
  acc.linear = double(lin_hits) / double(total);
  return acc;
}

ClusterScores cluster_scores(const Eigen::MatrixXd& embeddings,
                             const std::vector<int>& labels, int num_classes,
                             std::uint64_t seed) {
  const Eigen::Index n = embeddings.rows();
  if (n == 0)
    fail(ErrorKind::InvalidArgument, "cluster_scores: empty embedding set");
  if (Eigen::Index(labels.size()) != n)
    fail(ErrorKind::Shape, "cluster_scores: labels must match embedding rows");
  if (num_classes < 1)
    fail(ErrorKind::InvalidArgument,
         "cluster_scores: num_classes must be positive");
  const int k = int(std::min<Eigen::Index>(num_classes, n));
  const KMeansResult km = kmeans(embeddings, k, seed);
  ClusterScores s;
  s.purity = purity(km.assignment, labels);
  s.v_measure = v_measure(km.assignment, labels);
  return s;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  nlohmann::json rec;
  rec["count"] = recon.count;
  rec["cosine_mean"] = recon.cosine_mean;
  rec["cosine_sd"] = recon.cosine_sd;
  rec["mse"] = recon.mse_mean;
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t i = 0; i < recon.degrees.size(); ++i)
    per.push_back({{"degree", recon.degrees[i]}, {"mse", recon.per_degree[i]}});
  rec["per_degree_mse"] = per;
  j["reconstruction"] = rec;
  if (has_labels) {
    j["latent"] = {{"knn_accuracy", accuracy.knn},
                   {"linear_accuracy", accuracy.linear},
                   {"purity", clustering.purity},
                   {"v_measure", clustering.v_measure}};
  } else {
    j["latent"] = nullptr;
  }
  if (has_audit) {
    j["audit"] = {{"trials", audit.trials},
                  {"tolerance", audit.tolerance},
                  {"invariant_residual", audit.invariant_residual},
                  {"frame_residual", audit.frame_residual},
                  {"decode_residual", audit.decode_residual},
                  {"reconstruct_residual", audit.reconstruct_residual},
                  {"pass", audit.pass}};
  } else {
    j["audit"] = nullptr;
  }
  return j.dump(2) + "\n";
}

void write_eval_report(const EvalReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os)
    fail(ErrorKind::Io, "write_eval_report: cannot open for writing: " + path);
  os << report.to_json();
  if (!os) fail(ErrorKind::Io, "write_eval_report: write failed: " + path);
}

void write_embeddings_csv(const std::vector<std::string>& ids,
                          const Eigen::MatrixXd& embeddings,
                          const std::vector<std::string>* labels,
                          const std::string& path) {
  if (Eigen::Index(ids.size()) != embeddings.rows())
    fail(ErrorKind::Shape, "write_embeddings_csv: " +
                               std::to_string(ids.size()) + " ids vs " +
                               std::to_string(embeddings.rows()) + " rows");
  if (labels && labels->size() != ids.size())
    fail(ErrorKind::Shape,
         "write_embeddings_csv: labels must match the embedding rows");
  for (const auto& id : ids)
    if (id.find_first_of(",\n\r") != std::string::npos)
      fail(ErrorKind::InvalidArgument,
           "write_embeddings_csv: id contains a comma or newline: " + id);
  if (labels)
    for (const auto& l : *labels)
      if (l.find_first_of(",\n\r") != std::string::npos)
        fail(ErrorKind::InvalidArgument,
             "write_embeddings_csv: label contains a comma or newline: " + l);

  std::ofstream os(path);
  if (!os)
    fail(ErrorKind::Io,
         "write_embeddings_csv: cannot open for writing: " + path);
  os << "id";
  for (Eigen::Index c = 0; c < embeddings.cols(); ++c) os << ",z" << c;
  if (labels) os << ",label";
  os << "\n";
  char buf[40];
  for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
    os << ids[std::size_t(i)];
    for (Eigen::Index c = 0; c < embeddings.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", embeddings(i, c));
      os << ',' << buf;
    }
    if (labels) os << ',' << (*labels)[std::size_t(i)];
    os << "\n";
  }
  if (!os) fail(ErrorKind::Io, "write_embeddings_csv: write failed: " + path);
}

}  // namespace so3ae
