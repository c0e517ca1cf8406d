#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "so3ae/model.hpp"
#include "so3ae/steerable.hpp"

namespace so3ae {

// ---------------------------------------------------------------------------
// Latent-space classifiers.
// ---------------------------------------------------------------------------

// k-nearest-neighbour classification in Euclidean distance. Rows of the
// matrices are samples. Votes are uniform; the winning class is the one with
// the most votes, ties broken deterministically by the smallest class index.
// Neighbour ranking is by (distance, training index), so duplicated points
// resolve deterministically as well. Requires 1 <= k <= train rows.
std::vector<int> knn_classify(const Eigen::MatrixXd& train_x,
                              const std::vector<int>& train_y,
                              const Eigen::MatrixXd& test_x, int k = 5);

// One-layer softmax classifier (logits = W^T x + b) trained with cross
// entropy. Training protocol: Adam, 250 epochs, batch size 100, initial
// learning rate 0.01, decayed by 10x whenever the validation loss has not
// improved for 10 consecutive epochs; the training set doubles as the
// validation set when no separate one is supplied.
struct LinearClassifier {
  Eigen::MatrixXd w;  // dim x classes
  Eigen::VectorXd b;  // classes
  // A single-class training set cannot be fit; the classifier then always
  // predicts that class and flags itself degenerate.
  bool degenerate = false;
  int constant_class = -1;

  int predict(const Eigen::VectorXd& x) const;
  std::vector<int> predict(const Eigen::MatrixXd& x) const;
};

LinearClassifier train_linear_classifier(const Eigen::MatrixXd& train_x,
                                         const std::vector<int>& train_y,
                                         int num_classes,
                                         std::uint64_t seed = 0,
                                         const Eigen::MatrixXd* val_x = nullptr,
                                         const std::vector<int>* val_y = nullptr);

// Convenience wrapper: train on (train_x, train_y), predict test_x.
std::vector<int> linear_classify(const Eigen::MatrixXd& train_x,
                                 const std::vector<int>& train_y,
                                 const Eigen::MatrixXd& test_x, int num_classes,
                                 std::uint64_t seed = 0);

double accuracy(const std::vector<int>& predicted,
                const std::vector<int>& truth);

// ---------------------------------------------------------------------------
// Clustering.
// ---------------------------------------------------------------------------

struct KMeansResult {
  std::vector<int> assignment;  // per row of x, in [0, k)
  Eigen::MatrixXd centroids;    // k x dim
  double inertia = 0.0;         // sum of squared distances to assigned centroid
};

// Lloyd's algorithm with k-means++ seeding; `n_init` independent restarts keep
// the solution with the lowest inertia. Deterministic for a fixed seed.
KMeansResult kmeans(const Eigen::MatrixXd& x, int k, std::uint64_t seed,
                    int n_init = 10, int max_iter = 100);

// Purity of a clustering against reference labels: each cluster counts its
// modal label, and the hits are averaged over all samples. Range [0, 1];
// invariant under any relabelling of clusters or of classes.
double purity(const std::vector<int>& cluster, const std::vector<int>& label);

// V-measure: harmonic mean of homogeneity h = 1 - H(class|cluster)/H(class)
// and completeness c = 1 - H(cluster|class)/H(cluster), with the conventions
// h = 1 when H(class) = 0 and c = 1 when H(cluster) = 0. Range [0, 1];
// invariant under relabelling of either side.
double v_measure(const std::vector<int>& cluster, const std::vector<int>& label);

// ---------------------------------------------------------------------------
// Reconstruction metrics.
// ---------------------------------------------------------------------------

// Squared reconstruction error split by degree: entry i is the mean squared
// error over the coefficients of part i of the shared signature. Weighted by
// each part's coefficient count these entries sum to the total squared error.
Eigen::VectorXd per_degree_mse(const SteerableTensor& x,
                               const SteerableTensor& y);

// Cosine distance that tolerates degenerate operands instead of raising:
// both zero -> 0 (identical), one zero -> 1 (uninformative midpoint).
double cosine_or_default(const SteerableTensor& x, const SteerableTensor& y);

// ---------------------------------------------------------------------------
// Equivariance audit.
// ---------------------------------------------------------------------------

// Monte-Carlo audit of the trained model's symmetry contract. Each trial draws
// a random input x and rotation R and measures, as max-abs residuals:
//   invariant_residual    enc(Rx).invariants vs enc(x).invariants
//   frame_residual        enc(Rx).frame vs R * enc(x).frame
//   decode_residual       dec(z, R*F) vs R applied to dec(z, F)
//   reconstruct_residual  recon(Rx) vs R applied to recon(x)
// Reported values are maxima over trials; pass means every residual is within
// the tolerance. Deterministic for a fixed seed.
struct AuditResult {
  int trials = 0;
  double tolerance = 0.0;
  double invariant_residual = 0.0;
  double frame_residual = 0.0;
  double decode_residual = 0.0;
  double reconstruct_residual = 0.0;
  bool pass = false;
};

AuditResult equivariance_audit(const Model& model, const ModelParams& params,
                               int n_trials, double tolerance,
                               std::uint64_t seed);

// ---------------------------------------------------------------------------
// Evaluation report.
// ---------------------------------------------------------------------------

// Stable fold assignment for cross-validation-style evaluation: hash of the
// sample id modulo the fold count, independent of dataset order.
int fold_of(const std::string& id, int n_folds = 5);

struct ReconStats {
  int count = 0;
  double cosine_mean = 0.0;
  double cosine_sd = 0.0;
  double mse_mean = 0.0;
  std::vector<int> degrees;           // degree of each signature part
  std::vector<double> per_degree;     // mean per-degree MSE, parallel to degrees
};

ReconStats recon_stats(const std::vector<SteerableTensor>& original,
                       const std::vector<SteerableTensor>& reconstructed);

// Cross-validated latent-space accuracy: samples are split into folds by
// fold_of(id); each fold is predicted by classifiers trained on the others.
struct CvAccuracy {
  double knn = 0.0;
  double linear = 0.0;
};

CvAccuracy cv_latent_accuracy(const Eigen::MatrixXd& embeddings,
                              const std::vector<std::string>& ids,
                              const std::vector<int>& labels, int num_classes,
                              int k = 5, std::uint64_t seed = 0,
                              int n_folds = 5);

// k-means clustering of the embeddings (one centroid per class) scored
// against the labels.
struct ClusterScores {
  double purity = 0.0;
  double v_measure = 0.0;
};

ClusterScores cluster_scores(const Eigen::MatrixXd& embeddings,
                             const std::vector<int>& labels, int num_classes,
                             std::uint64_t seed = 0);

// Full evaluation summary. Label-dependent metrics use NaN when no labels
// were supplied; the audit section is present only when an audit ran.
struct EvalReport {
  ReconStats recon;
  bool has_labels = false;
  CvAccuracy accuracy;
  ClusterScores clustering;
  bool has_audit = false;
  AuditResult audit;

  std::string to_json() const;
};

void write_eval_report(const EvalReport& report, const std::string& path);

// Flat CSV of per-sample embeddings: header id,z0,...,z{d-1}[,label]; the
// label column is present only when labels are supplied (then one per row).
void write_embeddings_csv(const std::vector<std::string>& ids,
                          const Eigen::MatrixXd& embeddings,
                          const std::vector<std::string>* labels,
                          const std::string& path);

}  // namespace so3ae
