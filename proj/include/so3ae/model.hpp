#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "so3ae/optim.hpp"
#include "so3ae/rotation.hpp"
#include "so3ae/steerable.hpp"
#include "so3ae/tape.hpp"
#include "so3ae/tensor_io.hpp"

namespace so3ae {

// Architecture and schedule of the rotation-equivariant autoencoder. The
// encoder runs `blocks` CG blocks with per-block maximum degree degrees[i]
// and channel count channels[i] (encoder order, degrees.back() must be 1),
// then maps the final degree-0 channels to z invariants (plus z log-variances
// when variational) and the final degree-1 channels to two frame vectors.
// The decoder mirrors the encoder: block b (1-based) outputs degree
// degrees[B-1-b] (and the input degree L for b = B) with channels read from
// the reversed channel list, so the stack is symmetric around the latent
// space. Configs are validated at construction; every violated constraint is
// reported by name.
//
// JSON form (unknown keys rejected):
//   { "blocks": B, "degrees": [...], "channels": [...], "z": n,
//     "c_init": n (optional), "variational": bool,
//     "alpha": a, "beta": b, "e_rec": n, "e_warmup": n,
//     "input_signature": [[l, channels], ...],
//     "lr": r, "lr_decay_epochs": K, "batch_size": n, "epochs": n,
//     "seed": n }
struct ModelConfig {
  int blocks = 0;
  std::vector<int> degrees;   // encoder-order per-block l_max
  std::vector<int> channels;  // encoder-order per-block channel counts
  int z = 0;                  // invariant latent size
  std::optional<int> c_init;  // initial uniform projection channels
  bool variational = false;
  double alpha = 1.0;  // reconstruction weight
  double beta = 0.0;   // KL weight target (variational only)
  int e_rec = 0;       // epochs at beta = 0
  int e_warmup = 0;    // epochs of the linear beta ramp
  TensorSignature input_signature;
  // Optimizer / schedule.
  double lr = 1e-3;
  int lr_decay_epochs = 0;  // K in lr(e) = lr * 10^(-e/K); 0 keeps lr constant
  int batch_size = 32;
  int epochs = 0;
  std::uint64_t seed = 0;

  // Throws a config error naming the violated constraint.
  void validate() const;

  // Canonical serialization: fixed key order, compact. The checkpoint stores
  // this text and its FNV-1a hash.
  std::string to_json() const;
  static ModelConfig from_json_text(const std::string& text);
  static ModelConfig from_json_file(const std::string& path);
};

// What the encoder produces for one input: z rotation-invariant scalars
// (plus their log-variances when variational; frames are deterministic
// either way) and a learned right-handed orthonormal frame.
struct LatentCode {
  Eigen::VectorXd invariants;
  Eigen::VectorXd logvars;  // empty for non-variational models
  Frame frame = Frame::identity();
};

// All trainable state plus the non-trainable batch-norm running norms and
// the dataset scale baked in at training time (inputs are divided by it
// upstream; recorded here so later runs can reuse the same normalization).
struct ModelParams {
  ParamStore store;
  std::vector<std::vector<Eigen::VectorXd>> enc_running;  // [block][part]
  std::vector<std::vector<Eigen::VectorXd>> dec_running;  // [block][part]
  double data_scale = 1.0;
};

// KL weight at a given epoch: 0 before e_rec, then a linear ramp reaching
// beta_target after e_warmup epochs, constant afterwards. e_warmup = 0 steps
// directly to beta_target at e_rec.
double beta_schedule(int epoch, double beta_target, int e_rec, int e_warmup);

// One sample of mean + exp(logvar/2) * eta with eta ~ N(0, I).
Eigen::VectorXd reparameterize_draw(const Eigen::VectorXd& mean,
                                    const Eigen::VectorXd& logvar,
                                    std::mt19937_64& rng);

// alpha * mse(x, recon) + beta * KL(N(mu, diag sigma^2) || N(0, I)) with the
// closed-form diagonal-Gaussian KL = 1/2 sum(mu^2 + e^lv - 1 - lv). Empty
// mu/logvar mean a non-variational model (KL = 0).
struct LossComponents {
  double total = 0.0;
  double mse = 0.0;
  double kl = 0.0;
};
LossComponents model_loss(const SteerableTensor& x,
                          const SteerableTensor& recon,
                          const Eigen::VectorXd& mu,
                          const Eigen::VectorXd& logvar, double alpha,
                          double beta);

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double beta = 0.0;
  double train_total = 0.0, train_mse = 0.0, train_kl = 0.0;
  double val_total = 0.0, val_mse = 0.0, val_kl = 0.0;
  double val_cosine = 0.0;  // mean cosine loss on validation (metric only)
};

struct TrainResult {
  std::vector<EpochStats> history;
  int best_epoch = -1;  // -1 when no epoch was eligible for selection
  double best_val = std::numeric_limits<double>::infinity();
};

// Called after every epoch with the fresh statistics and the current
// parameter / optimizer state; is_best marks a new validation optimum
// (eligible epochs only: variational models start selection after the
// warmup ramp ends).
using EpochCallback =
    std::function<void(const EpochStats&, const ModelParams&, const AdamState&,
                       bool is_best)>;

class Model {
 public:
  explicit Model(ModelConfig cfg);
  // Injects a prebuilt CG table (it must cover the input degree). Lets tests
  // and audits run the model against an alternative table.
  Model(ModelConfig cfg, CGCache cache);

  const ModelConfig& config() const { return cfg_; }
  const TensorSignature& input_signature() const {
    return cfg_.input_signature;
  }
  std::size_t param_count() const { return param_count_; }

  // Parameter layout for this architecture: zero weights, unit batch-norm
  // running norms. init_params fills linear weights with N(0, 1/C_in) draws
  // and sets all affine weights to 1.
  ModelParams make_params() const;
  void init_params(ModelParams& p, std::mt19937_64& rng) const;

  // Inference (batch-norm running statistics, no sampling: the invariants
  // are the posterior means).
  LatentCode encode(const SteerableTensor& x, const ModelParams& p) const;
  SteerableTensor decode(const LatentCode& code, const ModelParams& p) const;
  SteerableTensor reconstruct(const SteerableTensor& x,
                              const ModelParams& p) const;

  // rotate(x, F^-1) for F = encode(x).frame as a rotation: a re-encode of
  // the result yields the identity frame and unchanged invariants.
  SteerableTensor rotate_to_canonical(const SteerableTensor& x,
                                      const ModelParams& p) const;

  // n decodes of N(0, I) invariant draws with the identity frame.
  // Variational models only.
  std::vector<SteerableTensor> sample_prior(int n, const ModelParams& p,
                                            std::uint64_t seed) const;

  // steps + 2 decodes along the segment between the two invariant
  // embeddings (endpoints included), all with the identity frame.
  std::vector<SteerableTensor> interpolate(const SteerableTensor& a,
                                           const SteerableTensor& b, int steps,
                                           const ModelParams& p) const;

  // Mini-batch Adam on alpha*MSE + beta(e)*KL with the exponential LR decay
  // lr(e) = lr * 10^(-e/K). Shuffling and reparameterization noise derive
  // from a per-epoch seed mixed from config.seed, so a run resumed from
  // epoch e reproduces the uninterrupted trajectory exactly. Throws a
  // numeric error with epoch/batch diagnostics if the loss turns non-finite.
  // prev_best_* seed the selection state when resuming.
  TrainResult train(const TensorDataset& train_set,
                    const TensorDataset& val_set, ModelParams& params,
                    AdamState& adam, int start_epoch = 0,
                    const EpochCallback& on_epoch = {},
                    double prev_best_val =
                        std::numeric_limits<double>::infinity(),
                    int prev_best_epoch = -1) const;

 private:
  struct BlockPlan {
    TensorSignature in_sig, etp_sig, out_sig;
    MstPairSet pairs;
    std::string seg_bn, seg_sn, seg_lin;
  };
  struct GraphIds {
    Tape::NodeId recon = -1;
    Tape::NodeId mu = -1;
    Tape::NodeId logvar = -1;
    Tape::NodeId frame = -1;
  };

  BlockPlan plan_block(const TensorSignature& in, int l_out, int c_out,
                       const std::string& prefix) const;
  Tape::NodeId run_block(Tape& t, Tape::NodeId h, const BlockPlan& blk,
                         std::vector<Eigen::VectorXd>& running,
                         bool training) const;
  // Encoder graph: input node -> (mu, logvar, frame) heads.
  GraphIds encode_graph(Tape& t, Tape::NodeId x, ModelParams& p,
                        bool training) const;
  // Decoder graph: latent node {(0,z),(1,2)} -> reconstruction.
  Tape::NodeId decode_graph(Tape& t, Tape::NodeId latent, ModelParams& p,
                            bool training) const;
  GraphIds forward_graph(Tape& t, std::vector<SteerableTensor> batch,
                         ModelParams& p, bool training,
                         std::mt19937_64* noise) const;
  SteerableTensor latent_tensor(const Eigen::VectorXd& invariants,
                                const Frame& frame) const;
  LatentCode run_encode(const SteerableTensor& x, const ModelParams& p) const;

  ModelConfig cfg_;
  CGCache cache_;
  std::vector<BlockPlan> enc_, dec_;
  TensorSignature latent_sig_;
  int c0_ = 0;  // channels entering the first encoder block
  std::size_t param_count_ = 0;
};

// Checkpoint file "SCKP" (little-endian): the canonical config JSON and its
// FNV-1a 64 hash, epoch counters and validation losses, the flat parameter
// vector, optional Adam state, the batch-norm running norms, and the dataset
// scale. Round-trips bit exactly.
struct Checkpoint {
  std::string config_json;
  ModelConfig config;
  ModelParams params;
  std::optional<AdamState> adam;
  int epoch = -1;  // last completed epoch, -1 for a freshly initialized model
  int best_epoch = -1;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double best_val = std::numeric_limits<double>::infinity();
};

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace so3ae
