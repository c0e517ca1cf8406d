#include "so3ae/tape.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "so3ae/errors.hpp"

namespace so3ae {

// ---------------------------------------------------------------------------
// ParamStore

std::size_t ParamStore::add_segment(const std::string& name,
                                    std::size_t size) {
  if (has_segment(name))
    fail(ErrorKind::Config, "ParamStore: duplicate segment '" + name + "'");
  if (size == 0)
    fail(ErrorKind::Config, "ParamStore: empty segment '" + name + "'");
  const std::size_t offset = values_.size();
  values_.resize(offset + size, 0.0);
  grads_.resize(offset + size, 0.0);
  segments_.push_back({name, offset, size});
  return offset;
}

bool ParamStore::has_segment(const std::string& name) const {
  for (const Segment& s : segments_)
    if (s.name == name) return true;
  return false;
}

const ParamStore::Segment& ParamStore::segment_info(
    const std::string& name) const {
  for (const Segment& s : segments_)
    if (s.name == name) return s;
  fail(ErrorKind::Config, "ParamStore: no segment '" + name + "'");
}

Eigen::Map<Eigen::VectorXd> ParamStore::segment(const std::string& name) {
  const Segment& s = segment_info(name);
  return {values_.data() + s.offset, Eigen::Index(s.size)};
}

Eigen::Map<const Eigen::VectorXd> ParamStore::segment(
    const std::string& name) const {
  const Segment& s = segment_info(name);
  return {values_.data() + s.offset, Eigen::Index(s.size)};
}

void ParamStore::zero_grad() {
  std::fill(grads_.begin(), grads_.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Tape plumbing

Tape::NodeId Tape::push(std::vector<SteerableTensor> value) {
  nodes_.push_back({std::move(value), {}});
  return NodeId(nodes_.size()) - 1;
}

Tape::ScalarId Tape::push_scalar(double value) {
  scalars_.push_back({value, 0.0});
  return ScalarId(scalars_.size()) - 1;
}

Tape::BatchNode& Tape::node(NodeId id) {
  if (id < 0 || id >= NodeId(nodes_.size()))
    fail(ErrorKind::InvalidArgument, "Tape: bad node id");
  return nodes_[std::size_t(id)];
}

const Tape::BatchNode& Tape::cnode(NodeId id) const {
  if (id < 0 || id >= NodeId(nodes_.size()))
    fail(ErrorKind::InvalidArgument, "Tape: bad node id");
  return nodes_[std::size_t(id)];
}

void Tape::check_batch(NodeId a, NodeId b) const {
  if (cnode(a).value.size() != cnode(b).value.size())
    fail(ErrorKind::Shape, "Tape: operand batch sizes differ");
}

const std::vector<SteerableTensor>& Tape::value(NodeId id) const {
  return cnode(id).value;
}

const std::vector<SteerableTensor>& Tape::grad(NodeId id) const {
  const BatchNode& n = cnode(id);
  if (n.grad.size() != n.value.size())
    fail(ErrorKind::InvalidArgument, "Tape: gradients not computed yet");
  return n.grad;
}

double Tape::scalar_value(ScalarId id) const {
  if (id < 0 || id >= ScalarId(scalars_.size()))
    fail(ErrorKind::InvalidArgument, "Tape: bad scalar id");
  return scalars_[std::size_t(id)].value;
}

Tape::NodeId Tape::input(std::vector<SteerableTensor> batch) {
  if (batch.empty()) fail(ErrorKind::InvalidArgument, "Tape: empty batch");
  const TensorSignature& sig = batch[0].signature();
  for (const SteerableTensor& t : batch)
    if (!(t.signature() == sig))
      fail(ErrorKind::Shape, "Tape: mixed signatures in input batch");
  return push(std::move(batch));
}

// ---------------------------------------------------------------------------
// Linear

Tape::NodeId Tape::linear(NodeId x, const std::string& seg,
                          const std::vector<int>& out_channels) {
  const BatchNode& xn = cnode(x);
  const TensorSignature& sig = xn.value[0].signature();
  if (out_channels.size() != sig.parts().size())
    fail(ErrorKind::Shape,
         "Tape::linear: " + std::to_string(out_channels.size()) +
             " output widths for " + std::to_string(sig.parts().size()) +
             " parts");
  const ParamStore::Segment info = params_->segment_info(seg);
  std::size_t need = 0;
  for (std::size_t i = 0; i < out_channels.size(); ++i) {
    if (out_channels[i] < 1)
      fail(ErrorKind::Shape, "Tape::linear: non-positive output width");
    need += std::size_t(sig.parts()[i].channels) *
            std::size_t(out_channels[i]);
  }
  if (need != info.size)
    fail(ErrorKind::Shape, "Tape::linear: segment '" + seg + "' holds " +
                               std::to_string(info.size) + " values, needs " +
                               std::to_string(need));

  std::vector<SigPart> parts;
  for (std::size_t i = 0; i < out_channels.size(); ++i)
    parts.push_back({sig.parts()[i].degree, out_channels[i]});
  const TensorSignature out_sig{std::move(parts)};

  std::vector<SteerableTensor> out;
  out.reserve(xn.value.size());
  for (const SteerableTensor& t : xn.value) {
    SteerableTensor o(out_sig);
    std::size_t off = info.offset;
    for (std::size_t i = 0; i < out_channels.size(); ++i) {
      const int c_in = sig.parts()[i].channels;
      const int k = out_channels[i];
      Eigen::Map<const Eigen::MatrixXd> w(params_->value_ptr(off), c_in, k);
      o.block(i) = w.transpose() * t.block(i);
      off += std::size_t(c_in) * std::size_t(k);
    }
    out.push_back(std::move(o));
  }
  const NodeId y = push(std::move(out));

  if (recording_) {
    const std::size_t offset = info.offset;
    backward_.push_back([this, x, y, offset, out_channels]() {
      const TensorSignature& in_sig = nodes_[std::size_t(x)].value[0].signature();
      for (std::size_t b = 0; b < nodes_[std::size_t(x)].value.size(); ++b) {
        std::size_t off = offset;
        for (std::size_t i = 0; i < out_channels.size(); ++i) {
          const int c_in = in_sig.parts()[i].channels;
          const int k = out_channels[i];
          Eigen::Map<const Eigen::MatrixXd> w(params_->value_ptr(off), c_in,
                                              k);
          Eigen::Map<Eigen::MatrixXd> gw(params_->grad_ptr(off), c_in, k);
          const Eigen::MatrixXd& gy = nodes_[std::size_t(y)].grad[b].block(i);
          gw.noalias() += nodes_[std::size_t(x)].value[b].block(i) *
                          gy.transpose();
          nodes_[std::size_t(x)].grad[b].block(i).noalias() += w * gy;
          off += std::size_t(c_in) * std::size_t(k);
        }
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Efficient tensor product

Tape::NodeId Tape::etp(NodeId x, NodeId y, const MstPairSet& pairs,
                       const CGCache& cache) {
  check_batch(x, y);
  const BatchNode& xn = cnode(x);
  const BatchNode& yn = cnode(y);
  std::vector<SteerableTensor> out;
  out.reserve(xn.value.size());
  for (std::size_t b = 0; b < xn.value.size(); ++b)
    out.push_back(etp_forward(xn.value[b], yn.value[b], pairs, cache));
  const NodeId z = push(std::move(out));

  if (recording_) {
    const MstPairSet* ps = &pairs;
    const CGCache* cc = &cache;
    backward_.push_back([this, x, y, z, ps, cc]() {
      BatchNode& xn2 = nodes_[std::size_t(x)];
      BatchNode& yn2 = nodes_[std::size_t(y)];
      BatchNode& zn = nodes_[std::size_t(z)];
      const TensorSignature& sig = xn2.value[0].signature();
      const int c = sig.parts()[0].channels;
      for (std::size_t b = 0; b < xn2.value.size(); ++b) {
        for (std::size_t blk = 0; blk < zn.value[b].num_blocks(); ++blk) {
          const int l3 = zn.value[b].signature().parts()[blk].degree;
          const Eigen::MatrixXd& gz = zn.grad[b].block(blk);
          int row = 0;
          for (const auto& [l1, l2] : ps->for_degree(l3)) {
            if (!sig.has_degree(l1) || !sig.has_degree(l2)) continue;
            const CgBlock& cg = cc->at(l1, l2, l3);
            const Eigen::MatrixXd& xb = xn2.value[b].block_for_degree(l1);
            const Eigen::MatrixXd& yb = yn2.value[b].block_for_degree(l2);
            Eigen::MatrixXd& gx = xn2.grad[b].block_for_degree(l1);
            Eigen::MatrixXd& gy = yn2.grad[b].block_for_degree(l2);
            for (int ch = 0; ch < c; ++ch, ++row)
              for (const CgBlock::Nz& e : cg.nz) {
                const double g = e.v * gz(row, e.i3);
                gx(ch, e.i1) += g * yb(ch, e.i2);
                gy(ch, e.i2) += g * xb(ch, e.i1);
              }
          }
        }
      }
    });
  }
  return z;
}

// ---------------------------------------------------------------------------
// Batch norm

Tape::NodeId Tape::batch_norm(NodeId x, const std::string& seg,
                              std::vector<Eigen::VectorXd>& running,
                              bool training, double momentum, double eps) {
  const BatchNode& xn = cnode(x);
  const TensorSignature& sig = xn.value[0].signature();
  const ParamStore::Segment info = params_->segment_info(seg);
  std::size_t need = 0;
  for (const SigPart& p : sig.parts()) need += std::size_t(p.channels);
  if (info.size != need || running.size() != sig.parts().size())
    fail(ErrorKind::Shape, "Tape::batch_norm: segment/running size mismatch");

  const std::size_t batch = xn.value.size();
  // Per part: the norms actually used for scaling (batch norms in training,
  // running norms in eval), saved for the backward pass.
  std::vector<Eigen::VectorXd> used(sig.parts().size());
  for (std::size_t i = 0; i < sig.parts().size(); ++i) {
    const SigPart part = sig.parts()[i];
    if (running[i].size() != part.channels)
      fail(ErrorKind::Shape, "Tape::batch_norm: running norm size for degree " +
                                 std::to_string(part.degree));
    if (training) {
      Eigen::VectorXd norm = Eigen::VectorXd::Zero(part.channels);
      for (const SteerableTensor& t : xn.value)
        norm += t.block(i).rowwise().squaredNorm();
      norm /= double(batch) * double(2 * part.degree + 1);
      running[i] = momentum * norm + (1.0 - momentum) * running[i];
      used[i] = std::move(norm);
    } else {
      if ((running[i].array() <= 0.0).any())
        fail(ErrorKind::Numeric,
             "Tape::batch_norm: non-positive running norm for degree " +
                 std::to_string(part.degree));
      used[i] = running[i];
    }
  }

  std::vector<SteerableTensor> out;
  out.reserve(batch);
  std::size_t woff = info.offset;
  std::vector<std::size_t> part_off(sig.parts().size());
  for (std::size_t i = 0; i < sig.parts().size(); ++i) {
    part_off[i] = woff;
    woff += std::size_t(sig.parts()[i].channels);
  }
  for (const SteerableTensor& t : xn.value) {
    SteerableTensor o(sig);
    for (std::size_t i = 0; i < sig.parts().size(); ++i) {
      Eigen::Map<const Eigen::VectorXd> w(params_->value_ptr(part_off[i]),
                                          sig.parts()[i].channels);
      const Eigen::ArrayXd scale = w.array() / (used[i].array() + eps).sqrt();
      o.block(i) = scale.matrix().asDiagonal() * t.block(i);
    }
    out.push_back(std::move(o));
  }
  const NodeId y = push(std::move(out));

  if (recording_) {
    backward_.push_back([this, x, y, part_off, used, training, eps]() {
      BatchNode& xn2 = nodes_[std::size_t(x)];
      BatchNode& yn2 = nodes_[std::size_t(y)];
      const TensorSignature& sig2 = xn2.value[0].signature();
      const std::size_t bsz = xn2.value.size();
      for (std::size_t i = 0; i < sig2.parts().size(); ++i) {
        const SigPart part = sig2.parts()[i];
        Eigen::Map<const Eigen::VectorXd> w(params_->value_ptr(part_off[i]),
                                            part.channels);
        Eigen::Map<Eigen::VectorXd> gw(params_->grad_ptr(part_off[i]),
                                       part.channels);
        const Eigen::ArrayXd s = (used[i].array() + eps).sqrt();
        // G_c = sum_b <gy_b, x_b> per channel.
        Eigen::VectorXd gdot = Eigen::VectorXd::Zero(part.channels);
        for (std::size_t b = 0; b < bsz; ++b)
          gdot += (yn2.grad[b].block(i).array() *
                   xn2.value[b].block(i).array())
                      .rowwise()
                      .sum()
                      .matrix();
        gw += (gdot.array() / s).matrix();
        const Eigen::ArrayXd direct = w.array() / s;
        if (training) {
          // d(norm)/dx feeds every batch element through the shared scale.
          const Eigen::ArrayXd through =
              w.array() * gdot.array() /
              (s * s * s * double(bsz) * double(2 * part.degree + 1));
          for (std::size_t b = 0; b < bsz; ++b)
            xn2.grad[b].block(i) +=
                direct.matrix().asDiagonal() * yn2.grad[b].block(i) -
                through.matrix().asDiagonal() * xn2.value[b].block(i);
        } else {
          for (std::size_t b = 0; b < bsz; ++b)
            xn2.grad[b].block(i) +=
                direct.matrix().asDiagonal() * yn2.grad[b].block(i);
        }
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Signal norm

Tape::NodeId Tape::signal_norm(NodeId x, const std::string& seg, double eps) {
  const BatchNode& xn = cnode(x);
  const TensorSignature& sig = xn.value[0].signature();
  const ParamStore::Segment info = params_->segment_info(seg);
  if (info.size != sig.parts().size())
    fail(ErrorKind::Shape, "Tape::signal_norm: need one weight per part");

  std::vector<double> inv_s(xn.value.size());
  std::vector<SteerableTensor> out;
  out.reserve(xn.value.size());
  for (std::size_t b = 0; b < xn.value.size(); ++b) {
    const double n_tot = total_norm(xn.value[b]);
    if (!(n_tot > eps))
      fail(ErrorKind::DegenerateScale,
           "Tape::signal_norm: total norm " + std::to_string(n_tot) +
               " below " + std::to_string(eps));
    inv_s[b] = 1.0 / std::sqrt(n_tot + eps);
    SteerableTensor o(sig);
    for (std::size_t i = 0; i < sig.parts().size(); ++i)
      o.block(i) = (params_->value_ptr(info.offset)[i] * inv_s[b]) *
                   xn.value[b].block(i);
    out.push_back(std::move(o));
  }
  const NodeId y = push(std::move(out));

  if (recording_) {
    const std::size_t offset = info.offset;
    backward_.push_back([this, x, y, offset, inv_s]() {
      BatchNode& xn2 = nodes_[std::size_t(x)];
      BatchNode& yn2 = nodes_[std::size_t(y)];
      const TensorSignature& sig2 = xn2.value[0].signature();
      for (std::size_t b = 0; b < xn2.value.size(); ++b) {
        // T = sum_l w_l <gy_l, x_l>; gx_l = w_l/s gy_l - T/s^3 x_l/(2l+1).
        double t_acc = 0.0;
        for (std::size_t i = 0; i < sig2.parts().size(); ++i) {
          const double w = params_->value_ptr(offset)[i];
          t_acc += w * (yn2.grad[b].block(i).array() *
                        xn2.value[b].block(i).array())
                           .sum();
        }
        const double s1 = inv_s[b];
        for (std::size_t i = 0; i < sig2.parts().size(); ++i) {
          const SigPart part = sig2.parts()[i];
          const double w = params_->value_ptr(offset)[i];
          params_->grad_ptr(offset)[i] +=
              s1 * (yn2.grad[b].block(i).array() *
                    xn2.value[b].block(i).array())
                       .sum();
          xn2.grad[b].block(i) +=
              (w * s1) * yn2.grad[b].block(i) -
              (t_acc * s1 * s1 * s1 / double(2 * part.degree + 1)) *
                  xn2.value[b].block(i);
        }
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Skip connection

Tape::NodeId Tape::skip_add(NodeId base, NodeId x) {
  check_batch(base, x);
  const BatchNode& bn = cnode(base);
  const BatchNode& xn = cnode(x);
  std::vector<SteerableTensor> out = bn.value;
  for (std::size_t b = 0; b < out.size(); ++b)
    add_skip(out[b], xn.value[b]);
  const NodeId y = push(std::move(out));

  if (recording_) {
    backward_.push_back([this, base, x, y]() {
      BatchNode& bn2 = nodes_[std::size_t(base)];
      BatchNode& xn2 = nodes_[std::size_t(x)];
      BatchNode& yn2 = nodes_[std::size_t(y)];
      for (std::size_t b = 0; b < yn2.value.size(); ++b) {
        for (std::size_t i = 0; i < bn2.value[b].num_blocks(); ++i)
          bn2.grad[b].block(i) += yn2.grad[b].block(i);
        // Adjoint of add_skip: copy back the overlapping corner.
        for (const SigPart& part : xn2.value[b].signature().parts()) {
          if (!yn2.value[b].signature().has_degree(part.degree)) continue;
          const Eigen::MatrixXd& gy =
              yn2.grad[b].block_for_degree(part.degree);
          Eigen::MatrixXd& gx = xn2.grad[b].block_for_degree(part.degree);
          const int c = std::min<int>(int(gy.rows()), part.channels);
          gx.topRows(c) += gy.topRows(c);
        }
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Degree selection / merge

Tape::NodeId Tape::select_degrees(NodeId x, const std::vector<int>& degrees) {
  const BatchNode& xn = cnode(x);
  const TensorSignature& sig = xn.value[0].signature();
  std::set<int> want(degrees.begin(), degrees.end());
  for (int l : degrees)
    if (!sig.has_degree(l))
      fail(ErrorKind::Shape, "Tape::select_degrees: input lacks degree " +
                                 std::to_string(l));
  std::vector<SigPart> parts;
  std::vector<std::size_t> src;
  for (std::size_t i = 0; i < sig.parts().size(); ++i)
    if (want.count(sig.parts()[i].degree)) {
      parts.push_back(sig.parts()[i]);
      src.push_back(i);
    }
  const TensorSignature out_sig{std::move(parts)};
  std::vector<SteerableTensor> out;
  out.reserve(xn.value.size());
  for (const SteerableTensor& t : xn.value) {
    SteerableTensor o(out_sig);
    for (std::size_t j = 0; j < src.size(); ++j) o.block(j) = t.block(src[j]);
    out.push_back(std::move(o));
  }
  const NodeId y = push(std::move(out));
  if (recording_) {
    backward_.push_back([this, x, y, src]() {
      BatchNode& xn2 = nodes_[std::size_t(x)];
      BatchNode& yn2 = nodes_[std::size_t(y)];
      for (std::size_t b = 0; b < yn2.value.size(); ++b)
        for (std::size_t j = 0; j < src.size(); ++j)
          xn2.grad[b].block(src[j]) += yn2.grad[b].block(j);
    });
  }
  return y;
}

Tape::NodeId Tape::merge(NodeId a, NodeId b) {
  check_batch(a, b);
  const BatchNode& an = cnode(a);
  const BatchNode& bn = cnode(b);
  const TensorSignature& sa = an.value[0].signature();
  const TensorSignature& sb = bn.value[0].signature();
  struct Source {
    int from_b;
    std::size_t part;
  };
  std::vector<std::pair<SigPart, Source>> all;
  for (std::size_t i = 0; i < sa.parts().size(); ++i)
    all.push_back({sa.parts()[i], {0, i}});
  for (std::size_t i = 0; i < sb.parts().size(); ++i)
    all.push_back({sb.parts()[i], {1, i}});
  std::sort(all.begin(), all.end(), [](const auto& u, const auto& v) {
    return u.first.degree < v.first.degree;
  });
  for (std::size_t i = 1; i < all.size(); ++i)
    if (all[i].first.degree == all[i - 1].first.degree)
      fail(ErrorKind::Shape, "Tape::merge: degree " +
                                 std::to_string(all[i].first.degree) +
                                 " present in both operands");
  std::vector<SigPart> parts;
  std::vector<Source> src;
  for (const auto& [p, s] : all) {
    parts.push_back(p);
    src.push_back(s);
  }
  const TensorSignature out_sig{std::move(parts)};
  std::vector<SteerableTensor> out;
  out.reserve(an.value.size());
  for (std::size_t bi = 0; bi < an.value.size(); ++bi) {
    SteerableTensor o(out_sig);
    for (std::size_t j = 0; j < src.size(); ++j)
      o.block(j) = (src[j].from_b ? bn.value[bi] : an.value[bi])
                       .block(src[j].part);
    out.push_back(std::move(o));
  }
  const NodeId y = push(std::move(out));
  if (recording_) {
    backward_.push_back([this, a, b, y, src]() {
      BatchNode& an2 = nodes_[std::size_t(a)];
      BatchNode& bn2 = nodes_[std::size_t(b)];
      BatchNode& yn2 = nodes_[std::size_t(y)];
      for (std::size_t bi = 0; bi < yn2.value.size(); ++bi)
        for (std::size_t j = 0; j < src.size(); ++j)
          (src[j].from_b ? bn2.grad[bi] : an2.grad[bi]).block(src[j].part) +=
              yn2.grad[bi].block(j);
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Gram-Schmidt over two degree-1 channels

Tape::NodeId Tape::gram_schmidt(NodeId x, double eps) {
  const BatchNode& xn = cnode(x);
  const TensorSignature& sig = xn.value[0].signature();
  if (sig.parts().size() != 1 || sig.parts()[0].degree != 1 ||
      sig.parts()[0].channels != 2)
    fail(ErrorKind::Shape,
         "Tape::gram_schmidt: need signature (1x2), got " + sig.to_string());

  std::vector<SteerableTensor> out;
  out.reserve(xn.value.size());
  for (const SteerableTensor& t : xn.value) {
    const Eigen::Vector3d v1 = t.block(0).row(0).transpose();
    const Eigen::Vector3d v2 = t.block(0).row(1).transpose();
    const double n1 = v1.norm();
    if (n1 <= eps)
      fail(ErrorKind::DegenerateFrame,
           "Tape::gram_schmidt: first vector has norm " + std::to_string(n1));
    const Eigen::Vector3d e1 = v1 / n1;
    const Eigen::Vector3d u2 = v2 - e1.dot(v2) * e1;
    const double n2 = u2.norm();
    if (n2 <= eps)
      fail(ErrorKind::DegenerateFrame,
           "Tape::gram_schmidt: second vector nearly parallel (residual " +
               std::to_string(n2) + ")");
    SteerableTensor o(sig);
    o.block(0).row(0) = e1.transpose();
    o.block(0).row(1) = (u2 / n2).transpose();
    out.push_back(std::move(o));
  }
  const NodeId y = push(std::move(out));

  if (recording_) {
    backward_.push_back([this, x, y]() {
      BatchNode& xn2 = nodes_[std::size_t(x)];
      BatchNode& yn2 = nodes_[std::size_t(y)];
      for (std::size_t b = 0; b < xn2.value.size(); ++b) {
        const Eigen::Vector3d v1 = xn2.value[b].block(0).row(0).transpose();
        const Eigen::Vector3d v2 = xn2.value[b].block(0).row(1).transpose();
        const Eigen::Vector3d e1 = yn2.value[b].block(0).row(0).transpose();
        const Eigen::Vector3d e2 = yn2.value[b].block(0).row(1).transpose();
        const double n1 = v1.norm();
        const Eigen::Vector3d u2 = v2 - e1.dot(v2) * e1;
        const double n2 = u2.norm();
        const Eigen::Vector3d ge1 = yn2.grad[b].block(0).row(0).transpose();
        const Eigen::Vector3d ge2 = yn2.grad[b].block(0).row(1).transpose();

        // e2 = u2/|u2| with u2 = v2 - (e1.v2) e1; e1 = v1/|v1|.
        const Eigen::Vector3d gu2 = (ge2 - e2 * e2.dot(ge2)) / n2;
        const Eigen::Vector3d gv2 = gu2 - e1 * e1.dot(gu2);
        const Eigen::Vector3d ge1_from_u2 =
            -gu2.dot(e1) * v2 - e1.dot(v2) * gu2;
        const Eigen::Vector3d ge1_total = ge1 + ge1_from_u2;
        const Eigen::Vector3d gv1 =
            (ge1_total - e1 * e1.dot(ge1_total)) / n1;

        xn2.grad[b].block(0).row(0) += gv1.transpose();
        xn2.grad[b].block(0).row(1) += gv2.transpose();
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Reparameterization

Tape::NodeId Tape::reparameterize(NodeId mean, NodeId logvar,
                                  std::mt19937_64& rng) {
  check_batch(mean, logvar);
  const BatchNode& mn = cnode(mean);
  const BatchNode& vn = cnode(logvar);
  const TensorSignature& sig = mn.value[0].signature();
  if (!(sig == vn.value[0].signature()) || sig.max_degree() != 0)
    fail(ErrorKind::Shape,
         "Tape::reparameterize: mean/logvar must share a degree-0 signature");

  std::normal_distribution<double> nd;
  std::vector<Eigen::VectorXd> etas;
  std::vector<SteerableTensor> out;
  out.reserve(mn.value.size());
  for (std::size_t b = 0; b < mn.value.size(); ++b) {
    const Eigen::Index z = mn.value[b].block(0).rows();
    Eigen::VectorXd eta(z);
    for (Eigen::Index i = 0; i < z; ++i) eta[i] = nd(rng);
    SteerableTensor o(sig);
    o.block(0) = mn.value[b].block(0) +
                 ((0.5 * vn.value[b].block(0).array()).exp() *
                  eta.array())
                     .matrix();
    etas.push_back(std::move(eta));
    out.push_back(std::move(o));
  }
  const NodeId y = push(std::move(out));

  if (recording_) {
    backward_.push_back([this, mean, logvar, y, etas]() {
      BatchNode& mn2 = nodes_[std::size_t(mean)];
      BatchNode& vn2 = nodes_[std::size_t(logvar)];
      BatchNode& yn2 = nodes_[std::size_t(y)];
      for (std::size_t b = 0; b < yn2.value.size(); ++b) {
        const Eigen::ArrayXd gz = yn2.grad[b].block(0).array();
        mn2.grad[b].block(0).array() += gz;
        vn2.grad[b].block(0).array() +=
            gz * etas[b].array() *
            (0.5 * vn2.value[b].block(0).array()).exp() * 0.5;
      }
    });
  }
  return y;
}

// ---------------------------------------------------------------------------
// Losses

Tape::ScalarId Tape::mse_loss(NodeId x,
                              const std::vector<SteerableTensor>& target) {
  const BatchNode& xn = cnode(x);
  if (target.size() != xn.value.size())
    fail(ErrorKind::Shape, "Tape::mse_loss: batch size mismatch");
  double acc = 0.0;
  for (std::size_t b = 0; b < target.size(); ++b)
    acc += mse(xn.value[b], target[b]);
  acc /= double(target.size());
  const ScalarId s = push_scalar(acc);

  if (recording_) {
    backward_.push_back([this, x, s, target]() {
      BatchNode& xn2 = nodes_[std::size_t(x)];
      const double gs = scalars_[std::size_t(s)].grad;
      const double count = double(xn2.value[0].coeff_count());
      const double scale = 2.0 * gs / (count * double(target.size()));
      for (std::size_t b = 0; b < target.size(); ++b)
        for (std::size_t i = 0; i < xn2.value[b].num_blocks(); ++i)
          xn2.grad[b].block(i) +=
              scale * (xn2.value[b].block(i) - target[b].block(i));
    });
  }
  return s;
}

Tape::ScalarId Tape::cosine_loss(NodeId x,
                                 const std::vector<SteerableTensor>& target) {
  const BatchNode& xn = cnode(x);
  if (target.size() != xn.value.size())
    fail(ErrorKind::Shape, "Tape::cosine_loss: batch size mismatch");
  std::vector<double> d(target.size()), xx(target.size()), tt(target.size());
  double acc = 0.0;
  for (std::size_t b = 0; b < target.size(); ++b) {
    d[b] = generalized_dot(xn.value[b], target[b]);
    xx[b] = generalized_dot(xn.value[b], xn.value[b]);
    tt[b] = generalized_dot(target[b], target[b]);
    if (!(xx[b] > 0.0) || !(tt[b] > 0.0))
      fail(ErrorKind::DegenerateScale,
           "Tape::cosine_loss: zero-norm operand in batch element " +
               std::to_string(b));
    acc += 1.0 - d[b] / std::sqrt(xx[b] * tt[b]);
  }
  acc /= double(target.size());
  const ScalarId s = push_scalar(acc);

  if (recording_) {
    backward_.push_back([this, x, s, target, d, xx, tt]() {
      BatchNode& xn2 = nodes_[std::size_t(x)];
      const double gs = scalars_[std::size_t(s)].grad;
      const std::size_t bsz = target.size();
      for (std::size_t b = 0; b < bsz; ++b) {
        const double denom = std::sqrt(xx[b] * tt[b]);
        const TensorSignature& sig = xn2.value[b].signature();
        for (std::size_t i = 0; i < sig.parts().size(); ++i) {
          const double root = std::sqrt(double(2 * sig.parts()[i].degree + 1));
          xn2.grad[b].block(i) +=
              (-gs / (double(bsz) * root * denom)) *
              (target[b].block(i) -
               (d[b] / xx[b]) * xn2.value[b].block(i));
        }
      }
    });
  }
  return s;
}

Tape::ScalarId Tape::kl_loss(NodeId mean, NodeId logvar) {
  check_batch(mean, logvar);
  const BatchNode& mn = cnode(mean);
  const BatchNode& vn = cnode(logvar);
  if (mn.value[0].signature().max_degree() != 0)
    fail(ErrorKind::Shape, "Tape::kl_loss: inputs must be degree-0 only");
  double acc = 0.0;
  for (std::size_t b = 0; b < mn.value.size(); ++b) {
    const Eigen::ArrayXd mu = mn.value[b].block(0).array();
    const Eigen::ArrayXd lv = vn.value[b].block(0).array();
    acc += 0.5 * (mu.square() + lv.exp() - 1.0 - lv).sum();
  }
  acc /= double(mn.value.size());
  const ScalarId s = push_scalar(acc);

  if (recording_) {
    backward_.push_back([this, mean, logvar, s]() {
      BatchNode& mn2 = nodes_[std::size_t(mean)];
      BatchNode& vn2 = nodes_[std::size_t(logvar)];
      const double gs = scalars_[std::size_t(s)].grad;
      const double bsz = double(mn2.value.size());
      for (std::size_t b = 0; b < mn2.value.size(); ++b) {
        mn2.grad[b].block(0).array() +=
            (gs / bsz) * mn2.value[b].block(0).array();
        vn2.grad[b].block(0).array() +=
            (gs / (2.0 * bsz)) *
            (vn2.value[b].block(0).array().exp() - 1.0);
      }
    });
  }
  return s;
}

Tape::ScalarId Tape::add_scaled(ScalarId a, double ca, ScalarId b,
                                double cb) {
  const double va = scalar_value(a);
  const double vb = scalar_value(b);
  const ScalarId s = push_scalar(ca * va + cb * vb);
  if (recording_) {
    backward_.push_back([this, a, ca, b, cb, s]() {
      const double gs = scalars_[std::size_t(s)].grad;
      scalars_[std::size_t(a)].grad += ca * gs;
      scalars_[std::size_t(b)].grad += cb * gs;
    });
  }
  return s;
}

// ---------------------------------------------------------------------------
// Backward driver

void Tape::backward(ScalarId loss) {
  if (!recording_)
    fail(ErrorKind::InvalidArgument,
         "Tape::backward: tape was created without recording");
  if (loss < 0 || loss >= ScalarId(scalars_.size()))
    fail(ErrorKind::InvalidArgument, "Tape::backward: bad loss id");
  for (BatchNode& n : nodes_) {
    n.grad.clear();
    n.grad.reserve(n.value.size());
    for (const SteerableTensor& t : n.value)
      n.grad.emplace_back(t.signature());
  }
  for (ScalarNode& s : scalars_) s.grad = 0.0;
  scalars_[std::size_t(loss)].grad = 1.0;
  for (auto it = backward_.rbegin(); it != backward_.rend(); ++it) (*it)();
}

}  // namespace so3ae
