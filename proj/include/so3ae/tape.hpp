#pragma once

#include <Eigen/Dense>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "so3ae/layers.hpp"
#include "so3ae/steerable.hpp"

namespace so3ae {

// Flat parameter storage with named segments. Values and gradients share the
// same layout, so one optimizer step can treat the whole model as a single
// vector. Segment order is fixed by registration order and serialized as-is.
class ParamStore {
 public:
  struct Segment {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
  };

  // Registers a new segment filled with zeros and returns its offset.
  std::size_t add_segment(const std::string& name, std::size_t size);

  bool has_segment(const std::string& name) const;
  const Segment& segment_info(const std::string& name) const;
  const std::vector<Segment>& segments() const { return segments_; }

  Eigen::Map<Eigen::VectorXd> segment(const std::string& name);
  Eigen::Map<const Eigen::VectorXd> segment(const std::string& name) const;

  std::size_t size() const { return values_.size(); }
  Eigen::Map<Eigen::VectorXd> values() {
    return {values_.data(), Eigen::Index(values_.size())};
  }
  Eigen::Map<const Eigen::VectorXd> values() const {
    return {values_.data(), Eigen::Index(values_.size())};
  }
  Eigen::Map<Eigen::VectorXd> grads() {
    return {grads_.data(), Eigen::Index(grads_.size())};
  }

  double* value_ptr(std::size_t offset) { return values_.data() + offset; }
  const double* value_ptr(std::size_t offset) const {
    return values_.data() + offset;
  }
  double* grad_ptr(std::size_t offset) { return grads_.data() + offset; }

  void zero_grad();

 private:
  std::vector<double> values_;
  std::vector<double> grads_;
  std::vector<Segment> segments_;
};

// Reverse-mode tape over batches of steerable tensors plus scalars. Each op
// computes its forward result eagerly and, while recording, appends a closure
// that propagates cotangents backward and accumulates parameter gradients
// into the bound ParamStore. Node ids index append-only value lists, so every
// closure can reach its operands without copies.
class Tape {
 public:
  using NodeId = int;
  using ScalarId = int;

  Tape(ParamStore& params, bool recording)
      : params_(&params), recording_(recording) {}

  // --- graph inputs -------------------------------------------------------
  NodeId input(std::vector<SteerableTensor> batch);

  // --- equivariant primitives --------------------------------------------
  // Per-degree channel mixing; weights live in the named segment, laid out
  // part-by-part as column-major C_in x C_out_i blocks.
  NodeId linear(NodeId x, const std::string& seg,
                const std::vector<int>& out_channels);

  // Channel-wise tensor product over the selected degree pairs. Passing the
  // same id twice differentiates the self-product correctly.
  NodeId etp(NodeId x, NodeId y, const MstPairSet& pairs,
             const CGCache& cache);

  // Batch norm; affine weights in `seg` (one value per part x channel,
  // part-major), running norms in `running` (mutated during training, frozen
  // in eval mode, never differentiated).
  NodeId batch_norm(NodeId x, const std::string& seg,
                    std::vector<Eigen::VectorXd>& running, bool training,
                    double momentum = 0.1, double eps = 1e-12);

  // Signal norm; one affine weight per part in `seg`.
  NodeId signal_norm(NodeId x, const std::string& seg, double eps = 1e-12);

  // out = zero tensor of `out_sig` plus the block-skip of x, then y added
  // on top: the block composition uses skip_add(linear_out, block_input).
  NodeId skip_add(NodeId base, NodeId x);

  // Restrict to a subset of degrees / merge tensors with disjoint degrees.
  NodeId select_degrees(NodeId x, const std::vector<int>& degrees);
  NodeId merge(NodeId a, NodeId b);

  // Orthonormalization of two degree-1 channels (signature exactly {(1,2)}):
  // rows v1, v2 -> rows e1, e2 via Gram-Schmidt.
  NodeId gram_schmidt(NodeId x, double eps = 1e-8);

  // z = mean + exp(0.5*logvar) * eta with eta ~ N(0,1) drawn at record time.
  // Signatures must be degree-0 only.
  NodeId reparameterize(NodeId mean, NodeId logvar, std::mt19937_64& rng);

  // --- losses -------------------------------------------------------------
  ScalarId mse_loss(NodeId x, const std::vector<SteerableTensor>& target);
  ScalarId cosine_loss(NodeId x, const std::vector<SteerableTensor>& target);
  // Mean over the batch of KL(N(mu, diag sigma^2) || N(0, I)) for degree-0
  // mean/logvar nodes.
  ScalarId kl_loss(NodeId mean, NodeId logvar);
  // ca*a + cb*b.
  ScalarId add_scaled(ScalarId a, double ca, ScalarId b, double cb);

  // --- access -------------------------------------------------------------
  const std::vector<SteerableTensor>& value(NodeId id) const;
  const std::vector<SteerableTensor>& grad(NodeId id) const;
  double scalar_value(ScalarId id) const;

  // Seeds d(loss)/d(loss) = 1 and runs all closures in reverse. Parameter
  // gradients accumulate into the store (call params.zero_grad() first).
  void backward(ScalarId loss);

  bool recording() const { return recording_; }

 private:
  struct BatchNode {
    std::vector<SteerableTensor> value;
    std::vector<SteerableTensor> grad;  // allocated at backward()
  };
  struct ScalarNode {
    double value = 0.0;
    double grad = 0.0;
  };

  NodeId push(std::vector<SteerableTensor> value);
  ScalarId push_scalar(double value);
  BatchNode& node(NodeId id);
  const BatchNode& cnode(NodeId id) const;
  void check_batch(NodeId a, NodeId b) const;

  ParamStore* params_;
  bool recording_;
  std::vector<BatchNode> nodes_;
  std::vector<ScalarNode> scalars_;
  std::vector<std::function<void()>> backward_;
};

}  // namespace so3ae
