#include "so3ae/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "so3ae/errors.hpp"

namespace so3ae {

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

}  // namespace

const std::vector<std::pair<int, int>>& MstPairSet::for_degree(int l3) const {
  if (l3 < 0 || l3 > l_max_out)
    fail(ErrorKind::InvalidArgument,
         "MstPairSet: degree " + std::to_string(l3) + " outside 0.." +
             std::to_string(l_max_out));
  return pairs[std::size_t(l3)];
}

MstPairSet mst_pair_set(int l_max_in, int l_max_out) {
  if (l_max_in < 0 || l_max_out < 0)
    fail(ErrorKind::InvalidArgument, "mst_pair_set: negative degree bound");
  MstPairSet out;
  out.l_max_in = l_max_in;
  out.l_max_out = l_max_out;
  out.pairs.resize(std::size_t(l_max_out) + 1);
  for (int l3 = 0; l3 <= l_max_out; ++l3) {
    // Kruskal over the admissible different-degree pair graph. Edges sorted
    // by (weight, l1, l2) make the tie-breaking deterministic: the result is
    // the spanning forest whose sorted edge sequence is lexicographically
    // smallest among all minimum-weight forests.
    struct Edge {
      long weight;
      int l1, l2;
    };
    std::vector<Edge> edges;
    for (int l1 = 0; l1 <= l_max_in; ++l1)
      for (int l2 = l1 + 1; l2 <= l_max_in; ++l2)
        if (l2 - l1 <= l3 && l3 <= l1 + l2)
          edges.push_back({long(2 * l1 + 1) * long(2 * l2 + 1), l1, l2});
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
      return std::tie(a.weight, a.l1, a.l2) < std::tie(b.weight, b.l1, b.l2);
    });
    UnionFind uf(l_max_in + 1);
    std::vector<std::pair<int, int>>& sel = out.pairs[std::size_t(l3)];
    for (const Edge& e : edges)
      if (uf.unite(e.l1, e.l2)) sel.emplace_back(e.l1, e.l2);
    for (int l = 0; l <= l_max_in; ++l)
      if (2 * l >= l3) sel.emplace_back(l, l);
    std::sort(sel.begin(), sel.end());
  }
  return out;
}

SteerableTensor linear_forward(const SteerableTensor& x,
                               const LinearParams& p) {
  const TensorSignature& sig = x.signature();
  if (p.w.size() != sig.parts().size())
    fail(ErrorKind::Shape, "linear_forward: " + std::to_string(p.w.size()) +
                               " weight matrices for " +
                               std::to_string(sig.parts().size()) + " parts");
  std::vector<SigPart> parts;
  for (std::size_t i = 0; i < p.w.size(); ++i) {
    if (p.w[i].rows() != sig.parts()[i].channels || p.w[i].cols() < 1)
      fail(ErrorKind::Shape,
           "linear_forward: weight for degree " +
               std::to_string(sig.parts()[i].degree) + " is " +
               std::to_string(p.w[i].rows()) + "x" +
               std::to_string(p.w[i].cols()) + ", input has " +
               std::to_string(sig.parts()[i].channels) + " channels");
    parts.push_back({sig.parts()[i].degree, int(p.w[i].cols())});
  }
  SteerableTensor out{TensorSignature(std::move(parts))};
  for (std::size_t i = 0; i < p.w.size(); ++i)
    out.block(i) = p.w[i].transpose() * x.block(i);
  return out;
}

TensorSignature etp_output_signature(const TensorSignature& in,
                                     const MstPairSet& pairs) {
  const int c = in.parts().empty() ? 0 : in.parts()[0].channels;
  std::vector<SigPart> parts;
  for (int l3 = 0; l3 <= pairs.l_max_out; ++l3) {
    int n = 0;
    for (const auto& [l1, l2] : pairs.for_degree(l3))
      if (in.has_degree(l1) && in.has_degree(l2)) ++n;
    if (n > 0) parts.push_back({l3, n * c});
  }
  return TensorSignature(parts);
}

SteerableTensor etp_forward(const SteerableTensor& x, const SteerableTensor& y,
                            const MstPairSet& pairs, const CGCache& cache) {
  if (!(x.signature() == y.signature()))
    fail(ErrorKind::Shape, "etp_forward: operand signatures differ (" +
                               x.signature().to_string() + " vs " +
                               y.signature().to_string() + ")");
  const TensorSignature& sig = x.signature();
  if (sig.parts().empty())
    fail(ErrorKind::Shape, "etp_forward: empty signature");
  const int c = sig.parts()[0].channels;
  for (const SigPart& p : sig.parts())
    if (p.channels != c)
      fail(ErrorKind::Shape,
           "etp_forward: channel-wise product needs a uniform channel count, "
           "got " +
               sig.to_string());

  SteerableTensor out(etp_output_signature(sig, pairs));
  for (std::size_t b = 0; b < out.num_blocks(); ++b) {
    const int l3 = out.signature().parts()[b].degree;
    Eigen::MatrixXd& dst = out.block(b);
    int row = 0;
    for (const auto& [l1, l2] : pairs.for_degree(l3)) {
      if (!sig.has_degree(l1) || !sig.has_degree(l2)) continue;
      const CgBlock& cg = cache.at(l1, l2, l3);
      const Eigen::MatrixXd& xb = x.block_for_degree(l1);
      const Eigen::MatrixXd& yb = y.block_for_degree(l2);
      for (int ch = 0; ch < c; ++ch, ++row)
        for (const CgBlock::Nz& e : cg.nz)
          dst(row, e.i3) += e.v * xb(ch, e.i1) * yb(ch, e.i2);
    }
  }
  return out;
}

BatchNormState BatchNormState::ones(const TensorSignature& sig) {
  BatchNormState st;
  for (const SigPart& p : sig.parts()) {
    st.running.push_back(Eigen::VectorXd::Ones(p.channels));
    st.weight.push_back(Eigen::VectorXd::Ones(p.channels));
  }
  return st;
}

std::vector<SteerableTensor> batch_norm_forward(
    const std::vector<SteerableTensor>& batch, BatchNormState& state,
    bool training, double momentum, double eps) {
  if (batch.empty())
    fail(ErrorKind::InvalidArgument, "batch_norm_forward: empty batch");
  const TensorSignature& sig = batch[0].signature();
  for (const SteerableTensor& t : batch)
    if (!(t.signature() == sig))
      fail(ErrorKind::Shape, "batch_norm_forward: mixed signatures in batch");
  if (state.running.size() != sig.parts().size() ||
      state.weight.size() != sig.parts().size())
    fail(ErrorKind::Shape, "batch_norm_forward: state/signature mismatch");

  std::vector<SteerableTensor> out(batch.size(), SteerableTensor(sig));
  for (std::size_t i = 0; i < sig.parts().size(); ++i) {
    const SigPart part = sig.parts()[i];
    if (state.running[i].size() != part.channels ||
        state.weight[i].size() != part.channels)
      fail(ErrorKind::Shape, "batch_norm_forward: state size for degree " +
                                 std::to_string(part.degree));
    Eigen::VectorXd norm;
    if (training) {
      norm = Eigen::VectorXd::Zero(part.channels);
      for (const SteerableTensor& t : batch)
        norm += t.block(i).rowwise().squaredNorm();
      norm /= double(batch.size()) * double(2 * part.degree + 1);
      state.running[i] =
          momentum * norm + (1.0 - momentum) * state.running[i];
    } else {
      norm = state.running[i];
      if ((norm.array() <= 0.0).any())
        fail(ErrorKind::Numeric,
             "batch_norm_forward: non-positive running norm for degree " +
                 std::to_string(part.degree));
    }
    const Eigen::ArrayXd scale =
        state.weight[i].array() / (norm.array() + eps).sqrt();
    for (std::size_t b = 0; b < batch.size(); ++b)
      out[b].block(i) = scale.matrix().asDiagonal() * batch[b].block(i);
  }
  return out;
}

SteerableTensor signal_norm_forward(const SteerableTensor& x,
                                    const Eigen::VectorXd& w, double eps) {
  const TensorSignature& sig = x.signature();
  if (w.size() != Eigen::Index(sig.parts().size()))
    fail(ErrorKind::Shape, "signal_norm_forward: " + std::to_string(w.size()) +
                               " weights for " +
                               std::to_string(sig.parts().size()) + " parts");
  const double n_tot = total_norm(x);
  if (!(n_tot > eps))
    fail(ErrorKind::DegenerateScale,
         "signal_norm_forward: total norm " + std::to_string(n_tot) +
             " below " + std::to_string(eps));
  const double inv = 1.0 / std::sqrt(n_tot + eps);
  SteerableTensor out(sig);
  for (std::size_t i = 0; i < sig.parts().size(); ++i)
    out.block(i) = (w[Eigen::Index(i)] * inv) * x.block(i);
  return out;
}

TensorSignature cg_block_output_signature(const TensorSignature& in,
                                          const CgBlockSpec& spec) {
  if (spec.l_max_out < 0 || spec.c_out < 1)
    fail(ErrorKind::Config, "cg_block: bad spec (l_max_out " +
                                std::to_string(spec.l_max_out) + ", c_out " +
                                std::to_string(spec.c_out) + ")");
  const int l_cap = std::min(2 * in.max_degree(), spec.l_max_out);
  std::vector<SigPart> parts;
  for (int l = 0; l <= l_cap; ++l) parts.push_back({l, spec.c_out});
  return TensorSignature(parts);
}

CgBlockParams cg_block_param_shapes(const TensorSignature& in,
                                    const CgBlockSpec& spec,
                                    const MstPairSet& pairs) {
  CgBlockParams p;
  p.bn = BatchNormState::ones(in);
  const TensorSignature mid = etp_output_signature(in, pairs);
  p.sn_w = Eigen::VectorXd::Ones(Eigen::Index(mid.parts().size()));
  for (const SigPart& part : mid.parts())
    p.lin.w.push_back(Eigen::MatrixXd::Zero(part.channels, spec.c_out));
  return p;
}

void add_skip(SteerableTensor& base, const SteerableTensor& x) {
  for (const SigPart& part : x.signature().parts()) {
    if (!base.signature().has_degree(part.degree)) continue;
    Eigen::MatrixXd& dst = base.block_for_degree(part.degree);
    const Eigen::MatrixXd& src = x.block_for_degree(part.degree);
    const int c = std::min<int>(int(dst.rows()), part.channels);
    dst.topRows(c) += src.topRows(c);
  }
}

std::vector<SteerableTensor> cg_block_forward(
    const std::vector<SteerableTensor>& batch, const CgBlockSpec& spec,
    CgBlockParams& params, const MstPairSet& pairs, const CGCache& cache,
    bool training) {
  if (batch.empty())
    fail(ErrorKind::InvalidArgument, "cg_block_forward: empty batch");
  std::vector<SteerableTensor> normed =
      batch_norm_forward(batch, params.bn, training);
  std::vector<SteerableTensor> out;
  out.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    SteerableTensor prod =
        etp_forward(normed[b], normed[b], pairs, cache);
    SteerableTensor scaled = signal_norm_forward(prod, params.sn_w);
    SteerableTensor mixed = linear_forward(scaled, params.lin);
    add_skip(mixed, batch[b]);
    out.push_back(std::move(mixed));
  }
  return out;
}

}  // namespace so3ae
