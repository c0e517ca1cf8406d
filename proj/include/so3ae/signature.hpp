#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace so3ae {

// One degree slot of a steerable tensor: `channels` copies of the real
// irreducible representation of degree `degree`.
struct SigPart {
  int degree = 0;
  int channels = 0;
  bool operator==(const SigPart&) const = default;
};

// Ordered list of (degree, channel) pairs with strictly increasing degrees
// and positive channel counts. The flat coefficient layout derived from a
// signature is degree-major, then channel-major, then m ascending from -l
// to +l.
class TensorSignature {
 public:
  TensorSignature() = default;
  explicit TensorSignature(std::vector<SigPart> parts);

  // Convenience: uniform channel count c for all degrees 0..l_max.
  static TensorSignature uniform(int l_max, int channels);

  const std::vector<SigPart>& parts() const { return parts_; }
  std::size_t num_parts() const { return parts_.size(); }
  bool empty() const { return parts_.empty(); }

  int max_degree() const;
  bool has_degree(int l) const;
  int channels(int l) const;          // 0 when the degree is absent
  int part_index(int l) const;        // -1 when absent
  std::size_t coeff_count() const;    // sum of C*(2l+1)

  std::string to_string() const;      // e.g. "(0x4, 1x4, 2x2)"
  bool operator==(const TensorSignature&) const = default;

 private:
  std::vector<SigPart> parts_;
};

}  // namespace so3ae
