// Copyright 2026 The dfmnet Authors
// SPDX-License-Identifier: Apache-2.0
#include "dfmnet/dfmw.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "dfmnet/error.hpp"

namespace dfmnet {

namespace {

constexpr char kMagic[4] = {'D', 'F', 'M', 'W'};
constexpr std::uint8_t kDtypeF32 = 0;

template <class T>
void put(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  U u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  std::string take(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw CorruptFile(std::string("truncated ") + what);
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_dfmw(const std::vector<NamedTensor>& entries) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint16_t>(out, kDfmwVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  std::unordered_set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.name).second) throw DuplicateName("tensor '" + e.name + "' appears twice");
    if (e.name.size() > std::numeric_limits<std::uint16_t>::max()) throw InvalidConfig("tensor name too long");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(e.name.size()));
    out += e.name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(e.tensor.rank()));
    for (std::int64_t d : e.tensor.shape()) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    put<std::uint8_t>(out, kDtypeF32);
    for (float v : e.tensor.data()) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

std::vector<NamedTensor> decode_dfmw(const std::string& bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic), "magic") != std::string(kMagic, sizeof(kMagic))) throw CorruptFile("bad magic");
  const auto version = in.get<std::uint16_t>("version");
  if (version != kDfmwVersion) throw UnknownVersion("weight file version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>("tensor count");
  std::vector<NamedTensor> entries;
  std::unordered_set<std::string> seen;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto name_len = in.get<std::uint16_t>("name length");
    std::string name = in.take(name_len, "name");
    if (!seen.insert(name).second) throw DuplicateName("tensor '" + name + "' appears twice");
    const auto ndim = in.get<std::uint8_t>("rank");
    Shape shape;
    std::uint64_t elements = 1;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      const auto extent = in.get<std::uint64_t>("dims");
      if (extent == 0 || extent > bytes.size() || elements > bytes.size() / extent) {
        throw CorruptFile("implausible extent in '" + name + "'");
      }
      elements *= extent;
      shape.push_back(static_cast<std::int64_t>(extent));
    }
    const auto dtype = in.get<std::uint8_t>("dtype");
    if (dtype != kDtypeF32) throw CorruptFile("unsupported dtype " + std::to_string(dtype) + " in '" + name + "'");
    in.need(elements * 4, "payload");
    std::vector<float> values(elements);
    for (auto& v : values) v = std::bit_cast<float>(in.get<std::uint32_t>("payload"));
    entries.push_back({std::move(name), Tensor::from(std::move(shape), std::move(values))});
  }
  if (in.remaining() != 0) throw CorruptFile(std::to_string(in.remaining()) + " trailing bytes");
  return entries;
}

void save_weights(const std::filesystem::path& path, const std::vector<NamedTensor>& entries) {
  const std::string bytes = encode_dfmw(entries);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw MissingFile("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw MissingFile("failed writing " + path.string());
}

void save_weights(const std::filesystem::path& path, const ParamStore& store) {
  save_weights(path, named_tensors(store));
}

std::vector<NamedTensor> load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_dfmw(bytes);
}

std::vector<NamedTensor> named_tensors(const ParamStore& store) {
  std::vector<NamedTensor> out;
  for (const auto& e : store.entries()) out.push_back({e.name, e.tensor});
  return out;
}

std::int64_t payload_bytes(const std::vector<NamedTensor>& entries) {
  std::int64_t total = 0;
  for (const auto& e : entries) total += 4 * e.tensor.numel();
  return total;
}

}  // namespace dfmnet
