#include "so3ae/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "so3ae/errors.hpp"
#include "so3ae/layers.hpp"

namespace so3ae {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void bad_config(const std::string& msg) {
  fail(ErrorKind::Config, "model config: " + msg);
}

// splitmix64 finalizer; decorrelates per-epoch seeds derived from one base.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::mt19937_64 epoch_rng(std::uint64_t seed, int epoch) {
  return std::mt19937_64(mix64(seed ^ mix64(std::uint64_t(epoch) + 1)));
}

// m ordering of a degree-1 row is (m=-1, 0, +1) = (y, z, x).
Eigen::Vector3d row_to_vec(const Eigen::RowVector3d& r) {
  return {r(2), r(0), r(1)};
}

Eigen::RowVector3d vec_to_row(const Eigen::Vector3d& v) {
  return {v.y(), v.z(), v.x()};
}

double cosine_or_one(const SteerableTensor& x, const SteerableTensor& y) {
  const double dxy = generalized_dot(x, y);
  const double dxx = generalized_dot(x, x);
  const double dyy = generalized_dot(y, y);
  if (!(dxx > 0.0) || !(dyy > 0.0)) return 1.0;  // random-pair mean
  return 1.0 - dxy / std::sqrt(dxx * dyy);
}

}  // namespace

// ---------------------------------------------------------------------------
// ModelConfig

void ModelConfig::validate() const {
  if (blocks < 1) bad_config("block count must be >= 1");
  if (int(degrees.size()) != blocks)
    bad_config("degrees list has " + std::to_string(degrees.size()) +
               " entries for " + std::to_string(blocks) + " blocks");
  if (int(channels.size()) != blocks)
    bad_config("channels list has " + std::to_string(channels.size()) +
               " entries for " + std::to_string(blocks) + " blocks");
  if (z < 1) bad_config("invariant latent size z must be >= 1");
  if (input_signature.empty()) bad_config("input signature is empty");
  const auto& parts = input_signature.parts();
  for (std::size_t i = 0; i < parts.size(); ++i)
    if (parts[i].degree != int(i))
      bad_config("input signature must cover degrees 0..L contiguously, got " +
                 input_signature.to_string());
  const int L = input_signature.max_degree();

  for (int i = 0; i < blocks; ++i) {
    if (degrees[i] < 0)
      bad_config("encoder block " + std::to_string(i) + ": negative l_max");
    if (degrees[i] > L)
      bad_config("encoder block " + std::to_string(i) + ": l_max " +
                 std::to_string(degrees[i]) + " exceeds the input degree L = " +
                 std::to_string(L));
    if (channels[i] < 1)
      bad_config("encoder block " + std::to_string(i) +
                 ": channel count must be >= 1");
  }
  if (degrees.back() != 1)
    bad_config("final encoder block must have l_max = 1, got " +
               std::to_string(degrees.back()));

  if (c_init && *c_init < 1) bad_config("c_init must be >= 1");
  if (!c_init) {
    for (const SigPart& p : parts)
      if (p.channels != parts[0].channels)
        bad_config(
            "an initial projection (c_init) is required when the input "
            "channels per degree are not uniform, got " +
            input_signature.to_string());
  }

  // Encoder reachability: one tensor product cannot raise the degree past
  // 2 * l_in.
  int l_in = L;
  for (int i = 0; i < blocks; ++i) {
    if (degrees[i] > 2 * l_in)
      bad_config("encoder block " + std::to_string(i) + ": l_max " +
                 std::to_string(degrees[i]) +
                 " unreachable from input degree " + std::to_string(l_in) +
                 " (l_out <= 2*l_in)");
    l_in = degrees[i];
  }

  // Decoder reachability: block b (1-based) starts from degree 1 and can at
  // most double the degree each block, so its output is capped by 2^b.
  int dl = 1;
  for (int b = 1; b <= blocks; ++b) {
    const int l_out = (b < blocks) ? degrees[blocks - 1 - b] : L;
    const long cap = (b < 31) ? (1L << b) : std::numeric_limits<long>::max();
    if (l_out > cap) {
      std::string msg = "decoder block " + std::to_string(b) + ": l_max " +
                        std::to_string(l_out) + " exceeds 2^b = " +
                        std::to_string(cap);
      if (b == blocks)
        msg += " (the block count must satisfy 2^B >= L, i.e. B >= log2 L)";
      bad_config(msg);
    }
    if (l_out > 2 * dl)
      bad_config("decoder block " + std::to_string(b) + ": l_max " +
                 std::to_string(l_out) + " unreachable from degree " +
                 std::to_string(dl) + " (l_out <= 2*l_in)");
    dl = l_out;
  }

  if (alpha < 0.0) bad_config("alpha must be >= 0");
  if (beta < 0.0) bad_config("beta must be >= 0");
  if (e_rec < 0 || e_warmup < 0) bad_config("e_rec and e_warmup must be >= 0");
  if (!(lr > 0.0)) bad_config("learning rate must be positive");
  if (lr_decay_epochs < 0) bad_config("lr_decay_epochs must be >= 0");
  if (batch_size < 1) bad_config("batch size must be >= 1");
  if (epochs < 0) bad_config("epoch count must be >= 0");
}

std::string ModelConfig::to_json() const {
  ordered_json j;
  j["blocks"] = blocks;
  j["degrees"] = degrees;
  j["channels"] = channels;
  j["z"] = z;
  if (c_init) j["c_init"] = *c_init;
  j["variational"] = variational;
  j["alpha"] = alpha;
  j["beta"] = beta;
  j["e_rec"] = e_rec;
  j["e_warmup"] = e_warmup;
  json sig = json::array();
  for (const SigPart& p : input_signature.parts())
    sig.push_back(json::array({p.degree, p.channels}));
  j["input_signature"] = sig;
  j["lr"] = lr;
  j["lr_decay_epochs"] = lr_decay_epochs;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["seed"] = seed;
  return j.dump();
}

ModelConfig ModelConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, std::string("model config: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::Parse, "model config: expected an object");

  static const char* known[] = {
      "blocks",  "degrees",  "channels",        "z",          "c_init",
      "variational", "alpha", "beta",           "e_rec",      "e_warmup",
      "input_signature", "lr", "lr_decay_epochs", "batch_size", "epochs",
      "seed"};
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) bad_config("unknown field '" + item.key() + "'");
  }

  auto require = [&](const char* k) -> const json& {
    if (!j.contains(k)) bad_config(std::string("missing field '") + k + "'");
    return j.at(k);
  };
  auto as_int = [&](const json& v, const char* k) -> int {
    if (!v.is_number_integer()) bad_config(std::string("field '") + k +
                                           "' must be an integer");
    return v.get<int>();
  };
  auto as_double = [&](const json& v, const char* k) -> double {
    if (!v.is_number()) bad_config(std::string("field '") + k +
                                   "' must be a number");
    return v.get<double>();
  };
  auto as_int_list = [&](const json& v, const char* k) -> std::vector<int> {
    if (!v.is_array()) bad_config(std::string("field '") + k +
                                  "' must be an array of integers");
    std::vector<int> out;
    for (const json& e : v) out.push_back(as_int(e, k));
    return out;
  };

  ModelConfig c;
  c.blocks = as_int(require("blocks"), "blocks");
  c.degrees = as_int_list(require("degrees"), "degrees");
  c.channels = as_int_list(require("channels"), "channels");
  c.z = as_int(require("z"), "z");
  if (j.contains("c_init") && !j["c_init"].is_null())
    c.c_init = as_int(j["c_init"], "c_init");
  {
    const json& v = require("variational");
    if (!v.is_boolean()) bad_config("field 'variational' must be a boolean");
    c.variational = v.get<bool>();
  }
  if (j.contains("alpha")) c.alpha = as_double(j["alpha"], "alpha");
  if (j.contains("beta")) c.beta = as_double(j["beta"], "beta");
  if (j.contains("e_rec")) c.e_rec = as_int(j["e_rec"], "e_rec");
  if (j.contains("e_warmup")) c.e_warmup = as_int(j["e_warmup"], "e_warmup");
  {
    const json& v = require("input_signature");
    if (!v.is_array()) bad_config("field 'input_signature' must be an array");
    std::vector<SigPart> parts;
    for (const json& e : v) {
      if (!e.is_array() || e.size() != 2)
        bad_config("input_signature entries must be [degree, channels] pairs");
      parts.push_back({as_int(e[0], "input_signature"),
                       as_int(e[1], "input_signature")});
    }
    try {
      c.input_signature = TensorSignature(std::move(parts));
    } catch (const Error& e) {
      bad_config(std::string("input_signature: ") + e.what());
    }
  }
  if (j.contains("lr")) c.lr = as_double(j["lr"], "lr");
  if (j.contains("lr_decay_epochs"))
    c.lr_decay_epochs = as_int(j["lr_decay_epochs"], "lr_decay_epochs");
  if (j.contains("batch_size"))
    c.batch_size = as_int(j["batch_size"], "batch_size");
  if (j.contains("epochs")) c.epochs = as_int(j["epochs"], "epochs");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer())
      bad_config("field 'seed' must be an integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  c.validate();
  return c;
}

ModelConfig ModelConfig::from_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

// ---------------------------------------------------------------------------
// Free helpers

double beta_schedule(int epoch, double beta_target, int e_rec, int e_warmup) {
  if (e_rec < 0 || e_warmup < 0)
    fail(ErrorKind::InvalidArgument, "beta_schedule: negative warmup epochs");
  if (epoch < e_rec) return 0.0;
  if (e_warmup == 0) return beta_target;
  const double t = double(epoch - e_rec) / double(e_warmup);
  return beta_target * std::min(t, 1.0);
}

Eigen::VectorXd reparameterize_draw(const Eigen::VectorXd& mean,
                                    const Eigen::VectorXd& logvar,
                                    std::mt19937_64& rng) {
  if (mean.size() != logvar.size())
    fail(ErrorKind::Shape, "reparameterize: mean/logvar size mismatch");
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd out(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i)
    out(i) = mean(i) + std::exp(0.5 * logvar(i)) * nd(rng);
  return out;
}

LossComponents model_loss(const SteerableTensor& x,
                          const SteerableTensor& recon,
                          const Eigen::VectorXd& mu,
                          const Eigen::VectorXd& logvar, double alpha,
                          double beta) {
  if (mu.size() != logvar.size())
    fail(ErrorKind::Shape, "model_loss: mean/logvar size mismatch");
  LossComponents out;
  out.mse = mse(x, recon);
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    out.kl += 0.5 * (mu(i) * mu(i) + std::exp(logvar(i)) - 1.0 - logvar(i));
  out.total = alpha * out.mse + beta * out.kl;
  return out;
}

// ---------------------------------------------------------------------------
// Model

Model::Model(ModelConfig cfg) : Model(std::move(cfg), CGCache()) {}

Model::Model(ModelConfig cfg, CGCache cache) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const int L = cfg_.input_signature.max_degree();
  if (cache.l_max() >= L) {
    cache_ = std::move(cache);
  } else if (cache.l_max() < 0) {
    cache_ = CGCache::build(L);
  } else {
    fail(ErrorKind::Config,
         "coupling table covers degrees up to " + std::to_string(cache.l_max()) +
             " but the input signature reaches degree " + std::to_string(L));
  }
  c0_ = cfg_.c_init ? *cfg_.c_init
                    : cfg_.input_signature.parts().front().channels;
  latent_sig_ = TensorSignature({{0, cfg_.z}, {1, 2}});

  TensorSignature cur = cfg_.c_init ? TensorSignature::uniform(L, c0_)
                                    : cfg_.input_signature;
  for (int i = 0; i < cfg_.blocks; ++i) {
    enc_.push_back(plan_block(cur, cfg_.degrees[i], cfg_.channels[i],
                              "enc.b" + std::to_string(i)));
    cur = enc_.back().out_sig;
  }

  const int c_b = cfg_.channels.back();
  cur = TensorSignature::uniform(1, c_b);
  for (int b = 1; b <= cfg_.blocks; ++b) {
    const int l_out = (b < cfg_.blocks) ? cfg_.degrees[cfg_.blocks - 1 - b] : L;
    const int c_out =
        (b < cfg_.blocks) ? cfg_.channels[cfg_.blocks - 1 - b] : c0_;
    dec_.push_back(plan_block(cur, l_out, c_out, "dec.b" + std::to_string(b)));
    cur = dec_.back().out_sig;
  }

  param_count_ = make_params().store.size();
}

Model::BlockPlan Model::plan_block(const TensorSignature& in, int l_out,
                                   int c_out,
                                   const std::string& prefix) const {
  BlockPlan p;
  p.in_sig = in;
  p.out_sig = cg_block_output_signature(in, CgBlockSpec{l_out, c_out});
  p.pairs = mst_pair_set(in.max_degree(), p.out_sig.max_degree());
  p.etp_sig = etp_output_signature(in, p.pairs);
  p.seg_bn = prefix + ".bn";
  p.seg_sn = prefix + ".sn";
  p.seg_lin = prefix + ".lin";
  return p;
}

ModelParams Model::make_params() const {
  ModelParams p;
  const int L = cfg_.input_signature.max_degree();

  auto lin_size = [](const TensorSignature& in,
                     const TensorSignature& out) -> std::size_t {
    std::size_t n = 0;
    for (const SigPart& part : in.parts())
      n += std::size_t(part.channels) * std::size_t(out.channels(part.degree));
    return n;
  };
  auto add_block = [&](const BlockPlan& blk) {
    std::size_t bn = 0;
    for (const SigPart& part : blk.in_sig.parts()) bn += part.channels;
    p.store.add_segment(blk.seg_bn, bn);
    p.store.add_segment(blk.seg_sn, blk.etp_sig.num_parts());
    p.store.add_segment(blk.seg_lin, lin_size(blk.etp_sig, blk.out_sig));
  };

  if (cfg_.c_init)
    p.store.add_segment("enc.init",
                        lin_size(cfg_.input_signature,
                                 TensorSignature::uniform(L, c0_)));
  for (const BlockPlan& blk : enc_) add_block(blk);

  const int c_b = cfg_.channels.back();
  p.store.add_segment("enc.mu", std::size_t(c_b) * cfg_.z);
  if (cfg_.variational)
    p.store.add_segment("enc.logvar", std::size_t(c_b) * cfg_.z);
  p.store.add_segment("enc.frame", std::size_t(c_b) * 2);
  p.store.add_segment("dec.head", std::size_t(cfg_.z) * c_b + 2 * c_b);
  for (const BlockPlan& blk : dec_) add_block(blk);
  if (cfg_.c_init)
    p.store.add_segment("dec.final",
                        lin_size(TensorSignature::uniform(L, c0_),
                                 cfg_.input_signature));

  auto running_for = [](const std::vector<BlockPlan>& plans) {
    std::vector<std::vector<Eigen::VectorXd>> r;
    for (const BlockPlan& blk : plans) {
      std::vector<Eigen::VectorXd> per_part;
      for (const SigPart& part : blk.in_sig.parts())
        per_part.push_back(Eigen::VectorXd::Ones(part.channels));
      r.push_back(std::move(per_part));
    }
    return r;
  };
  p.enc_running = running_for(enc_);
  p.dec_running = running_for(dec_);
  return p;
}

void Model::init_params(ModelParams& p, std::mt19937_64& rng) const {
  if (p.store.size() != param_count_)
    fail(ErrorKind::Shape, "init_params: parameter store layout mismatch");
  std::normal_distribution<double> nd(0.0, 1.0);

  // Per-degree weight blocks get N(0, 1/C_in) entries; the draw order is the
  // segment registration order, so one seed pins the whole initialization.
  auto fill_linear = [&](const std::string& seg, const TensorSignature& in,
                         const TensorSignature& out) {
    auto m = p.store.segment(seg);
    std::size_t off = 0;
    for (const SigPart& part : in.parts()) {
      const int c_out = out.channels(part.degree);
      const double sigma = 1.0 / std::sqrt(double(part.channels));
      for (int k = 0; k < part.channels * c_out; ++k)
        m(Eigen::Index(off++)) = sigma * nd(rng);
    }
  };

  const int L = cfg_.input_signature.max_degree();
  const int c_b = cfg_.channels.back();
  if (cfg_.c_init)
    fill_linear("enc.init", cfg_.input_signature,
                TensorSignature::uniform(L, c0_));
  for (const BlockPlan& blk : enc_) {
    p.store.segment(blk.seg_bn).setOnes();
    p.store.segment(blk.seg_sn).setOnes();
    fill_linear(blk.seg_lin, blk.etp_sig, blk.out_sig);
  }
  const TensorSignature head_in = TensorSignature::uniform(1, c_b);
  fill_linear("enc.mu", TensorSignature({{0, c_b}}),
              TensorSignature({{0, cfg_.z}}));
  if (cfg_.variational)
    fill_linear("enc.logvar", TensorSignature({{0, c_b}}),
                TensorSignature({{0, cfg_.z}}));
  fill_linear("enc.frame", TensorSignature({{1, c_b}}),
              TensorSignature({{1, 2}}));
  fill_linear("dec.head", latent_sig_, head_in);
  for (const BlockPlan& blk : dec_) {
    p.store.segment(blk.seg_bn).setOnes();
    p.store.segment(blk.seg_sn).setOnes();
    fill_linear(blk.seg_lin, blk.etp_sig, blk.out_sig);
  }
  if (cfg_.c_init)
    fill_linear("dec.final", TensorSignature::uniform(L, c0_),
                cfg_.input_signature);

  for (auto& blk : p.enc_running)
    for (auto& v : blk) v.setOnes();
  for (auto& blk : p.dec_running)
    for (auto& v : blk) v.setOnes();
}

Tape::NodeId Model::run_block(Tape& t, Tape::NodeId h, const BlockPlan& blk,
                              std::vector<Eigen::VectorXd>& running,
                              bool training) const {
  const Tape::NodeId bn = t.batch_norm(h, blk.seg_bn, running, training);
  const Tape::NodeId tp = t.etp(bn, bn, blk.pairs, cache_);
  const Tape::NodeId sn = t.signal_norm(tp, blk.seg_sn);
  const std::vector<int> outc(blk.out_sig.num_parts(),
                              blk.out_sig.parts().front().channels);
  const Tape::NodeId ln = t.linear(sn, blk.seg_lin, outc);
  return t.skip_add(ln, h);
}

Model::GraphIds Model::encode_graph(Tape& t, Tape::NodeId x, ModelParams& p,
                                    bool training) const {
  const int L = cfg_.input_signature.max_degree();
  Tape::NodeId h = x;
  if (cfg_.c_init)
    h = t.linear(h, "enc.init", std::vector<int>(std::size_t(L) + 1, c0_));
  for (std::size_t i = 0; i < enc_.size(); ++i)
    h = run_block(t, h, enc_[i], p.enc_running[i], training);

  const Tape::NodeId h0 = t.select_degrees(h, {0});
  const Tape::NodeId h1 = t.select_degrees(h, {1});
  GraphIds g;
  g.mu = t.linear(h0, "enc.mu", {cfg_.z});
  if (cfg_.variational) g.logvar = t.linear(h0, "enc.logvar", {cfg_.z});
  const Tape::NodeId pre_frame = t.linear(h1, "enc.frame", {2});
  g.frame = t.gram_schmidt(pre_frame);
  return g;
}

Tape::NodeId Model::decode_graph(Tape& t, Tape::NodeId latent, ModelParams& p,
                                 bool training) const {
  const int c_b = cfg_.channels.back();
  Tape::NodeId h = t.linear(latent, "dec.head", {c_b, c_b});
  for (std::size_t b = 0; b < dec_.size(); ++b)
    h = run_block(t, h, dec_[b], p.dec_running[b], training);
  if (cfg_.c_init) {
    std::vector<int> outc;
    for (const SigPart& part : cfg_.input_signature.parts())
      outc.push_back(part.channels);
    h = t.linear(h, "dec.final", outc);
  }
  return h;
}

Model::GraphIds Model::forward_graph(Tape& t,
                                     std::vector<SteerableTensor> batch,
                                     ModelParams& p, bool training,
                                     std::mt19937_64* noise) const {
  const Tape::NodeId x = t.input(std::move(batch));
  GraphIds g = encode_graph(t, x, p, training);
  Tape::NodeId zn = g.mu;
  if (training && cfg_.variational) zn = t.reparameterize(g.mu, g.logvar, *noise);
  const Tape::NodeId latent = t.merge(zn, g.frame);
  g.recon = decode_graph(t, latent, p, training);
  return g;
}

SteerableTensor Model::latent_tensor(const Eigen::VectorXd& invariants,
                                     const Frame& frame) const {
  SteerableTensor lt(latent_sig_);
  lt.block(0).col(0) = invariants;
  lt.block(1).row(0) = vec_to_row(frame.e1);
  lt.block(1).row(1) = vec_to_row(frame.e2);
  return lt;
}

LatentCode Model::run_encode(const SteerableTensor& x,
                             const ModelParams& p) const {
  if (x.signature() != cfg_.input_signature)
    fail(ErrorKind::Shape, "encode: input signature " +
                               x.signature().to_string() +
                               " does not match the model input " +
                               cfg_.input_signature.to_string());
  // A non-recording tape only reads the store and the running norms.
  ModelParams& mp = const_cast<ModelParams&>(p);
  Tape t(mp.store, false);
  const Tape::NodeId xn = t.input({x});
  const GraphIds g = encode_graph(t, xn, mp, false);

  LatentCode code;
  code.invariants = t.value(g.mu)[0].block(0).col(0);
  if (cfg_.variational)
    code.logvars = t.value(g.logvar)[0].block(0).col(0);
  const Eigen::MatrixXd& fb = t.value(g.frame)[0].block(0);
  code.frame.e1 = row_to_vec(fb.row(0));
  code.frame.e2 = row_to_vec(fb.row(1));
  code.frame.e3 = code.frame.e1.cross(code.frame.e2);
  return code;
}

LatentCode Model::encode(const SteerableTensor& x, const ModelParams& p) const {
  return run_encode(x, p);
}

SteerableTensor Model::decode(const LatentCode& code,
                              const ModelParams& p) const {
  if (code.invariants.size() != cfg_.z)
    fail(ErrorKind::Shape, "decode: expected " + std::to_string(cfg_.z) +
                               " invariants, got " +
                               std::to_string(code.invariants.size()));
  ModelParams& mp = const_cast<ModelParams&>(p);
  Tape t(mp.store, false);
  const Tape::NodeId latent = t.input({latent_tensor(code.invariants,
                                                     code.frame)});
  const Tape::NodeId recon = decode_graph(t, latent, mp, false);
  return t.value(recon)[0];
}

SteerableTensor Model::reconstruct(const SteerableTensor& x,
                                   const ModelParams& p) const {
  if (x.signature() != cfg_.input_signature)
    fail(ErrorKind::Shape, "reconstruct: input signature mismatch");
  ModelParams& mp = const_cast<ModelParams&>(p);
  Tape t(mp.store, false);
  const GraphIds g = forward_graph(t, {x}, mp, false, nullptr);
  return t.value(g.recon)[0];
}

SteerableTensor Model::rotate_to_canonical(const SteerableTensor& x,
                                           const ModelParams& p) const {
  const LatentCode code = run_encode(x, p);
  return rotate(x, code.frame.as_rotation().inverse());
}

std::vector<SteerableTensor> Model::sample_prior(int n, const ModelParams& p,
                                                 std::uint64_t seed) const {
  if (!cfg_.variational)
    fail(ErrorKind::Config,
         "sample_prior requires a variational model (variational = true)");
  if (n < 0) fail(ErrorKind::InvalidArgument, "sample_prior: negative count");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<SteerableTensor> out;
  out.reserve(std::size_t(n));
  for (int i = 0; i < n; ++i) {
    LatentCode code;
    code.invariants = Eigen::VectorXd::NullaryExpr(
        cfg_.z, [&](Eigen::Index) { return nd(rng); });
    code.frame = Frame::identity();
    out.push_back(decode(code, p));
  }
  return out;
}

std::vector<SteerableTensor> Model::interpolate(const SteerableTensor& a,
                                                const SteerableTensor& b,
                                                int steps,
                                                const ModelParams& p) const {
  if (steps < 0)
    fail(ErrorKind::InvalidArgument, "interpolate: negative step count");
  const LatentCode ca = run_encode(a, p);
  const LatentCode cb = run_encode(b, p);
  std::vector<SteerableTensor> out;
  out.reserve(std::size_t(steps) + 2);
  for (int k = 0; k <= steps + 1; ++k) {
    const double tt = double(k) / double(steps + 1);
    LatentCode code;
    code.invariants = (1.0 - tt) * ca.invariants + tt * cb.invariants;
    code.frame = Frame::identity();
    out.push_back(decode(code, p));
  }
  return out;
}

TrainResult Model::train(const TensorDataset& train_set,
                         const TensorDataset& val_set, ModelParams& params,
                         AdamState& adam, int start_epoch,
                         const EpochCallback& on_epoch, double prev_best_val,
                         int prev_best_epoch) const {
  if (train_set.signature != cfg_.input_signature)
    fail(ErrorKind::Shape, "train: training set signature " +
                               train_set.signature.to_string() +
                               " does not match the model input " +
                               cfg_.input_signature.to_string());
  if (val_set.signature != cfg_.input_signature)
    fail(ErrorKind::Shape, "train: validation set signature mismatch");
  if (train_set.size() == 0)
    fail(ErrorKind::InvalidArgument, "train: empty training set");
  if (val_set.size() == 0)
    fail(ErrorKind::InvalidArgument, "train: empty validation set");
  if (params.store.size() != param_count_)
    fail(ErrorKind::Shape, "train: parameter store layout mismatch");
  if (adam.m.size() == 0) adam = AdamState::init(param_count_);
  if (std::size_t(adam.m.size()) != param_count_)
    fail(ErrorKind::Shape, "train: optimizer state size mismatch");
  if (start_epoch < 0)
    fail(ErrorKind::InvalidArgument, "train: negative start epoch");

  TrainResult res;
  res.best_val = prev_best_val;
  res.best_epoch = prev_best_epoch;
  const int n_train = int(train_set.size());
  const int n_val = int(val_set.size());
  const int bsz = cfg_.batch_size;

  for (int e = start_epoch; e < cfg_.epochs; ++e) {
    const double lr_e =
        cfg_.lr_decay_epochs > 0
            ? cfg_.lr * std::pow(10.0, -double(e) / cfg_.lr_decay_epochs)
            : cfg_.lr;
    const double beta_e =
        cfg_.variational
            ? beta_schedule(e, cfg_.beta, cfg_.e_rec, cfg_.e_warmup)
            : 0.0;
    std::mt19937_64 rng = epoch_rng(cfg_.seed, e);

    std::vector<int> idx(static_cast<std::size_t>(n_train), 0);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);

    double tr_tot = 0.0, tr_mse = 0.0, tr_kl = 0.0;
    int batch_index = 0;
    for (int start = 0; start < n_train; start += bsz, ++batch_index) {
      const int stop = std::min(start + bsz, n_train);
      std::vector<SteerableTensor> batch;
      batch.reserve(std::size_t(stop - start));
      for (int k = start; k < stop; ++k)
        batch.push_back(train_set.items[std::size_t(idx[std::size_t(k)])]);

      Tape t(params.store, true);
      const GraphIds g = forward_graph(t, batch, params, true, &rng);
      const Tape::ScalarId mse_id = t.mse_loss(g.recon, batch);
      double kl_v = 0.0;
      Tape::ScalarId loss;
      if (cfg_.variational) {
        const Tape::ScalarId kl_id = t.kl_loss(g.mu, g.logvar);
        kl_v = t.scalar_value(kl_id);
        loss = t.add_scaled(mse_id, cfg_.alpha, kl_id, beta_e);
      } else {
        loss = t.add_scaled(mse_id, cfg_.alpha, mse_id, 0.0);
      }
      const double mse_v = t.scalar_value(mse_id);
      const double total = t.scalar_value(loss);
      if (!std::isfinite(total))
        fail(ErrorKind::Numeric,
             "train: non-finite loss at epoch " + std::to_string(e) +
                 ", batch " + std::to_string(batch_index) + " (mse=" +
                 std::to_string(mse_v) + ", kl=" + std::to_string(kl_v) + ")");

      params.store.zero_grad();
      t.backward(loss);
      adam_step(params.store, adam, lr_e);

      const double nb = double(stop - start);
      tr_tot += total * nb;
      tr_mse += mse_v * nb;
      tr_kl += kl_v * nb;
    }

    double v_mse = 0.0, v_kl = 0.0, v_cos = 0.0;
    for (int start = 0; start < n_val; start += bsz) {
      const int stop = std::min(start + bsz, n_val);
      std::vector<SteerableTensor> batch(
          val_set.items.begin() + start, val_set.items.begin() + stop);
      Tape t(params.store, false);
      const GraphIds g = forward_graph(t, batch, params, false, nullptr);
      const double nb = double(stop - start);
      v_mse += t.scalar_value(t.mse_loss(g.recon, batch)) * nb;
      if (cfg_.variational)
        v_kl += t.scalar_value(t.kl_loss(g.mu, g.logvar)) * nb;
      const std::vector<SteerableTensor>& recon = t.value(g.recon);
      for (std::size_t b = 0; b < batch.size(); ++b)
        v_cos += cosine_or_one(batch[b], recon[b]);
    }
    v_mse /= double(n_val);
    v_kl /= double(n_val);
    v_cos /= double(n_val);
    const double v_tot = cfg_.alpha * v_mse + beta_e * v_kl;
    if (!std::isfinite(v_tot))
      fail(ErrorKind::Numeric,
           "train: non-finite validation loss at epoch " + std::to_string(e));

    EpochStats st;
    st.epoch = e;
    st.lr = lr_e;
    st.beta = beta_e;
    st.train_total = tr_tot / double(n_train);
    st.train_mse = tr_mse / double(n_train);
    st.train_kl = tr_kl / double(n_train);
    st.val_total = v_tot;
    st.val_mse = v_mse;
    st.val_kl = v_kl;
    st.val_cosine = v_cos;

    const bool eligible =
        !cfg_.variational || e >= cfg_.e_rec + cfg_.e_warmup;
    const bool is_best = eligible && v_tot < res.best_val;
    if (is_best) {
      res.best_val = v_tot;
      res.best_epoch = e;
    }
    res.history.push_back(st);
    if (on_epoch) on_epoch(st, params, adam, is_best);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void put_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), std::streamsize(n));
}
void put_u16(std::ostream& os, std::uint16_t v) { put_bytes(os, &v, 2); }
void put_u32(std::ostream& os, std::uint32_t v) { put_bytes(os, &v, 4); }
void put_u64(std::ostream& os, std::uint64_t v) { put_bytes(os, &v, 8); }
void put_i32(std::ostream& os, std::int32_t v) { put_bytes(os, &v, 4); }
void put_f64(std::ostream& os, double v) { put_bytes(os, &v, 8); }

void get_bytes(std::istream& is, void* p, std::size_t n,
               const std::string& path) {
  is.read(static_cast<char*>(p), std::streamsize(n));
  if (!is) fail(ErrorKind::Parse, path + ": truncated checkpoint");
}
std::uint16_t get_u16(std::istream& is, const std::string& path) {
  std::uint16_t v;
  get_bytes(is, &v, 2, path);
  return v;
}
std::uint32_t get_u32(std::istream& is, const std::string& path) {
  std::uint32_t v;
  get_bytes(is, &v, 4, path);
  return v;
}
std::uint64_t get_u64(std::istream& is, const std::string& path) {
  std::uint64_t v;
  get_bytes(is, &v, 8, path);
  return v;
}
std::int32_t get_i32(std::istream& is, const std::string& path) {
  std::int32_t v;
  get_bytes(is, &v, 4, path);
  return v;
}
double get_f64(std::istream& is, const std::string& path) {
  double v;
  get_bytes(is, &v, 8, path);
  return v;
}

void put_vec(std::ostream& os, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(os, v(i));
}

void put_running(std::ostream& os,
                 const std::vector<std::vector<Eigen::VectorXd>>& r) {
  put_u32(os, std::uint32_t(r.size()));
  for (const auto& blk : r) {
    put_u32(os, std::uint32_t(blk.size()));
    for (const Eigen::VectorXd& v : blk) {
      put_u32(os, std::uint32_t(v.size()));
      put_vec(os, v);
    }
  }
}

void get_running(std::istream& is, const std::string& path,
                 std::vector<std::vector<Eigen::VectorXd>>& r) {
  const std::uint32_t nblocks = get_u32(is, path);
  if (nblocks != r.size())
    fail(ErrorKind::Parse, path + ": running-norm block count mismatch");
  for (auto& blk : r) {
    const std::uint32_t nparts = get_u32(is, path);
    if (nparts != blk.size())
      fail(ErrorKind::Parse, path + ": running-norm part count mismatch");
    for (Eigen::VectorXd& v : blk) {
      const std::uint32_t len = get_u32(is, path);
      if (len != std::uint32_t(v.size()))
        fail(ErrorKind::Parse, path + ": running-norm length mismatch");
      for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = get_f64(is, path);
    }
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::string cfg_json =
      c.config_json.empty() ? c.config.to_json() : c.config_json;

  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::Io, "cannot open " + path + " for writing");
  put_bytes(os, "SCKP", 4);
  put_u16(os, 1);
  put_u64(os, fnv1a64(cfg_json));
  put_u32(os, std::uint32_t(cfg_json.size()));
  put_bytes(os, cfg_json.data(), cfg_json.size());
  put_i32(os, c.epoch);
  put_i32(os, c.best_epoch);
  put_f64(os, c.val_loss);
  put_f64(os, c.best_val);
  put_f64(os, c.params.data_scale);

  const auto values = c.params.store.values();
  put_u64(os, std::uint64_t(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) put_f64(os, values(i));

  if (c.adam) {
    os.put(char(1));
    put_u64(os, std::uint64_t(c.adam->step));
    put_vec(os, c.adam->m);
    put_vec(os, c.adam->v);
  } else {
    os.put(char(0));
  }

  put_running(os, c.params.enc_running);
  put_running(os, c.params.dec_running);
  if (!os) fail(ErrorKind::Io, "failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::Io, "cannot open checkpoint " + path);
  char magic[4];
  get_bytes(is, magic, 4, path);
  if (std::memcmp(magic, "SCKP", 4) != 0)
    fail(ErrorKind::Parse, path + ": not a checkpoint file (bad magic)");
  const std::uint16_t version = get_u16(is, path);
  if (version != 1)
    fail(ErrorKind::Parse,
         path + ": unsupported checkpoint version " + std::to_string(version));

  Checkpoint c;
  const std::uint64_t hash = get_u64(is, path);
  const std::uint32_t cfg_len = get_u32(is, path);
  c.config_json.resize(cfg_len);
  if (cfg_len > 0) get_bytes(is, c.config_json.data(), cfg_len, path);
  if (fnv1a64(c.config_json) != hash)
    fail(ErrorKind::Parse, path + ": config hash mismatch (corrupt file)");
  c.config = ModelConfig::from_json_text(c.config_json);

  c.epoch = get_i32(is, path);
  c.best_epoch = get_i32(is, path);
  c.val_loss = get_f64(is, path);
  c.best_val = get_f64(is, path);
  const double data_scale = get_f64(is, path);

  Model model(c.config);
  c.params = model.make_params();
  c.params.data_scale = data_scale;

  const std::uint64_t n = get_u64(is, path);
  if (n != std::uint64_t(c.params.store.size()))
    fail(ErrorKind::Parse,
         path + ": parameter count " + std::to_string(n) +
             " does not match the architecture (" +
             std::to_string(c.params.store.size()) + ")");
  auto values = c.params.store.values();
  for (Eigen::Index i = 0; i < values.size(); ++i)
    values(i) = get_f64(is, path);

  char has_adam;
  get_bytes(is, &has_adam, 1, path);
  if (has_adam == 1) {
    AdamState a = AdamState::init(c.params.store.size());
    a.step = static_cast<long long>(get_u64(is, path));
    for (Eigen::Index i = 0; i < a.m.size(); ++i) a.m(i) = get_f64(is, path);
    for (Eigen::Index i = 0; i < a.v.size(); ++i) a.v(i) = get_f64(is, path);
    c.adam = std::move(a);
  } else if (has_adam != 0) {
    fail(ErrorKind::Parse, path + ": corrupt optimizer-state flag");
  }

  get_running(is, path, c.params.enc_running);
  get_running(is, path, c.params.dec_running);
  return c;
}

}  // namespace so3ae
