#include "so3ae/signature.hpp"

#include <sstream>

#include "so3ae/errors.hpp"

namespace so3ae {

TensorSignature::TensorSignature(std::vector<SigPart> parts)
    : parts_(std::move(parts)) {
  int prev = -1;
  for (const SigPart& p : parts_) {
    if (p.degree <= prev)
      fail(ErrorKind::InvalidArgument,
           "TensorSignature: degrees must be strictly increasing");
    if (p.degree < 0 || p.channels <= 0)
      fail(ErrorKind::InvalidArgument,
           "TensorSignature: degrees must be >= 0 and channel counts > 0");
    prev = p.degree;
  }
}

TensorSignature TensorSignature::uniform(int l_max, int channels) {
  std::vector<SigPart> parts;
  parts.reserve(l_max + 1);
  for (int l = 0; l <= l_max; ++l) parts.push_back({l, channels});
  return TensorSignature(std::move(parts));
}

int TensorSignature::max_degree() const {
  return parts_.empty() ? -1 : parts_.back().degree;
}

bool TensorSignature::has_degree(int l) const { return part_index(l) >= 0; }

int TensorSignature::channels(int l) const {
  const int i = part_index(l);
  return i < 0 ? 0 : parts_[i].channels;
}

int TensorSignature::part_index(int l) const {
  for (std::size_t i = 0; i < parts_.size(); ++i)
    if (parts_[i].degree == l) return int(i);
  return -1;
}

std::size_t TensorSignature::coeff_count() const {
  std::size_t n = 0;
  for (const SigPart& p : parts_)
    n += std::size_t(p.channels) * (2 * p.degree + 1);
  return n;
}

std::string TensorSignature::to_string() const {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    if (i) os << ", ";
    os << parts_[i].degree << "x" << parts_[i].channels;
  }
  os << ")";
  return os.str();
}

}  // namespace so3ae
