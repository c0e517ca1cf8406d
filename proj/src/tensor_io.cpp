#include "so3ae/tensor_io.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

#include "so3ae/errors.hpp"

namespace so3ae {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

using nlohmann::json;

json signature_to_json(const TensorSignature& sig) {
  json parts = json::array();
  for (const SigPart& p : sig.parts())
    parts.push_back(json::array({p.degree, p.channels}));
  return parts;
}

TensorSignature signature_from_json(const json& j) {
  if (!j.is_array()) fail(ErrorKind::Parse, "signature: expected an array");
  std::vector<SigPart> parts;
  for (const json& e : j) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
        !e[1].is_number_integer())
      fail(ErrorKind::Parse, "signature: expected [degree, channels] pairs");
    parts.push_back({e[0].get<int>(), e[1].get<int>()});
  }
  try {
    return TensorSignature(parts);
  } catch (const Error& e) {
    fail(ErrorKind::Parse, std::string("signature: ") + e.what());
  }
}

json parse_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::Io, "cannot open " + path);
  json j = json::parse(is, nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::Parse, "malformed JSON in " + path);
  return j;
}

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) fail(ErrorKind::Parse, "tensor dataset: truncated file " + path);
  return v;
}

}  // namespace

void write_tensor_json(const SteerableTensor& t, const std::string& path) {
  json j;
  j["signature"] = signature_to_json(t.signature());
  j["coefficients"] = t.to_flat();
  std::ofstream os(path);
  if (!os) fail(ErrorKind::Io, "write_tensor_json: cannot open " + path);
  os << j.dump(2) << "\n";
  if (!os) fail(ErrorKind::Io, "write_tensor_json: write failed " + path);
}

SteerableTensor read_tensor_json(const std::string& path) {
  const json j = parse_file(path);
  if (!j.is_object() || !j.contains("signature") || !j.contains("coefficients"))
    fail(ErrorKind::Parse,
         path + ": expected {\"signature\": ..., \"coefficients\": ...}");
  const TensorSignature sig = signature_from_json(j["signature"]);
  const json& cj = j["coefficients"];
  if (!cj.is_array())
    fail(ErrorKind::Parse, path + ": coefficients must be an array");
  std::vector<double> coeffs;
  coeffs.reserve(cj.size());
  for (const json& v : cj) {
    if (!v.is_number())
      fail(ErrorKind::Parse, path + ": non-numeric coefficient");
    coeffs.push_back(v.get<double>());
  }
  try {
    return SteerableTensor::from_flat(sig, coeffs);
  } catch (const Error& e) {
    fail(ErrorKind::Parse, path + ": " + e.what());
  }
}

int TensorDataset::index_of(const std::string& id) const {
  const auto it = std::find(ids.begin(), ids.end(), id);
  return it == ids.end() ? -1 : int(it - ids.begin());
}

void TensorDataset::validate() const {
  if (ids.size() != items.size())
    fail(ErrorKind::Shape, "TensorDataset: id/item count mismatch");
  std::set<std::string> seen;
  for (const std::string& id : ids) {
    if (id.size() > 65535)
      fail(ErrorKind::InvalidArgument, "TensorDataset: id too long");
    if (!seen.insert(id).second)
      fail(ErrorKind::InvalidArgument, "TensorDataset: duplicate id " + id);
  }
  for (const SteerableTensor& t : items)
    if (!(t.signature() == signature))
      fail(ErrorKind::Shape,
           "TensorDataset: item signature differs from dataset signature");
}

void write_tensor_dataset(const TensorDataset& d, const std::string& path) {
  d.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::Io, "write_tensor_dataset: cannot open " + path);
  os.write("STDS", 4);
  put<std::uint16_t>(os, 1);
  put<std::uint16_t>(os, std::uint16_t(d.signature.num_parts()));
  for (const SigPart& p : d.signature.parts()) {
    put<std::uint16_t>(os, std::uint16_t(p.degree));
    put<std::uint32_t>(os, std::uint32_t(p.channels));
  }
  put<std::uint32_t>(os, std::uint32_t(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) {
    put<std::uint16_t>(os, std::uint16_t(d.ids[i].size()));
    os.write(d.ids[i].data(), std::streamsize(d.ids[i].size()));
    const std::vector<double> flat = d.items[i].to_flat();
    os.write(reinterpret_cast<const char*>(flat.data()),
             std::streamsize(flat.size() * sizeof(double)));
  }
  if (!os) fail(ErrorKind::Io, "write_tensor_dataset: write failed " + path);
}

TensorDataset read_tensor_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::Io, "read_tensor_dataset: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "STDS", 4) != 0)
    fail(ErrorKind::Parse, "read_tensor_dataset: bad magic in " + path);
  if (get<std::uint16_t>(is, path) != 1)
    fail(ErrorKind::Parse, "read_tensor_dataset: unsupported version");
  const int parts = get<std::uint16_t>(is, path);
  std::vector<SigPart> sig_parts;
  for (int p = 0; p < parts; ++p) {
    const int degree = get<std::uint16_t>(is, path);
    const int channels = int(get<std::uint32_t>(is, path));
    sig_parts.push_back({degree, channels});
  }
  TensorDataset d;
  try {
    d.signature = TensorSignature(sig_parts);
  } catch (const Error& e) {
    fail(ErrorKind::Parse, path + ": " + e.what());
  }
  const auto count = get<std::uint32_t>(is, path);
  const std::size_t ncoeff = d.signature.coeff_count();
  for (std::uint32_t i = 0; i < count; ++i) {
    const int id_len = get<std::uint16_t>(is, path);
    std::string id(id_len, '\0');
    is.read(id.data(), id_len);
    if (!is) fail(ErrorKind::Parse, "read_tensor_dataset: truncated id");
    std::vector<double> coeffs(ncoeff);
    is.read(reinterpret_cast<char*>(coeffs.data()),
            std::streamsize(ncoeff * sizeof(double)));
    if (!is)
      fail(ErrorKind::Parse, "read_tensor_dataset: truncated item " + id);
    d.ids.push_back(std::move(id));
    d.items.push_back(SteerableTensor::from_flat(d.signature, coeffs));
  }
  d.validate();
  return d;
}

std::vector<std::string> LabelMap::classes() const {
  std::set<std::string> s(labels.begin(), labels.end());
  return {s.begin(), s.end()};
}

std::optional<std::string> LabelMap::label_of(const std::string& id) const {
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] == id) return labels[i];
  return std::nullopt;
}

LabelMap read_labels(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::Io, "read_labels: cannot open " + path);
  LabelMap m;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 >= line.size())
      fail(ErrorKind::Parse,
           path + ":" + std::to_string(lineno) + ": expected 'id,label'");
    std::string id = line.substr(0, comma);
    if (std::find(m.ids.begin(), m.ids.end(), id) != m.ids.end())
      fail(ErrorKind::Parse, path + ":" + std::to_string(lineno) +
                                 ": duplicate id '" + id + "'");
    m.ids.push_back(std::move(id));
    m.labels.push_back(line.substr(comma + 1));
  }
  return m;
}

void write_labels(const LabelMap& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail(ErrorKind::Io, "write_labels: cannot open " + path);
  for (std::size_t i = 0; i < m.ids.size(); ++i)
    os << m.ids[i] << "," << m.labels[i] << "\n";
  if (!os) fail(ErrorKind::Io, "write_labels: write failed " + path);
}

}  // namespace so3ae
