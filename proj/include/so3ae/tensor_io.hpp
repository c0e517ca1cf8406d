#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "so3ae/steerable.hpp"

namespace so3ae {

// FNV-1a 64-bit content hash; used for config hashes in checkpoints and run
// manifests and for deterministic id-based fold assignment.
std::uint64_t fnv1a64(std::string_view s);

// Serialization of steerable tensors. Both forms carry the signature and the
// flat coefficient vector in the canonical layout (degree-major, then
// channel, then m from -l to +l) and round-trip bit exactly.
//
// JSON form:
//   { "signature": [[l, channels], ...], "coefficients": [ ... ] }
//
// Binary dataset form "STDS" (little-endian):
//   u8 magic[4], u16 version = 1, u16 part count,
//   per part: u16 degree, u32 channels;
//   u32 item count, then per item: u16 id length, id bytes,
//   coeff_count f64 coefficients.
// Every item shares the one signature. Ids are free-form strings (<= 65535
// bytes) unique within a file.

void write_tensor_json(const SteerableTensor& t, const std::string& path);
SteerableTensor read_tensor_json(const std::string& path);

struct TensorDataset {
  TensorSignature signature;
  std::vector<std::string> ids;
  std::vector<SteerableTensor> items;

  std::size_t size() const { return items.size(); }
  int index_of(const std::string& id) const;  // -1 when absent
  void validate() const;
};

void write_tensor_dataset(const TensorDataset& d, const std::string& path);
TensorDataset read_tensor_dataset(const std::string& path);

// Labels file: text lines "id,label" (no header). Labels are arbitrary
// strings; class indices are assigned by sorted label order at use sites.
struct LabelMap {
  std::vector<std::string> ids;
  std::vector<std::string> labels;

  // Class vocabulary in sorted order and per-id class index lookup.
  std::vector<std::string> classes() const;
  std::optional<std::string> label_of(const std::string& id) const;
};

LabelMap read_labels(const std::string& path);
void write_labels(const LabelMap& m, const std::string& path);

}  // namespace so3ae
