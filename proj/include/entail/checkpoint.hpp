#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "entail/common.hpp"
#include "entail/tensor.hpp"
#include "entail/vocab.hpp"

namespace entail {

class CheckpointVersionError : public Error {
 public:
  using Error::Error;
};

class CheckpointHashError : public Error {
 public:
  using Error::Error;
};

class CheckpointTruncatedError : public Error {
 public:
  using Error::Error;
};

using Sha256 = std::array<std::uint8_t, 32>;

inline Sha256 sha256_bytes(const void* data, std::size_t n) {
  Sha256 out{};
  unsigned int len = 0;
  if (EVP_Digest(data, n, out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size()) {
    throw Error("sha256: digest failed");
  }
  return out;
}

// Hash of the vocabulary content in id order; newline-joined so that both
// tokens and their order are covered.
inline Sha256 vocab_hash(const Vocabulary& vocab) {
  std::string buf;
  for (const std::string& t : vocab.tokens()) {
    buf += t;
    buf += '\n';
  }
  return sha256_bytes(buf.data(), buf.size());
}

inline std::string hex(const Sha256& h) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (std::uint8_t b : h) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xf]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Tensor-record container: magic, format version, JSON metadata block, a
// vocabulary SHA-256, then named tensors with dtype tag, shape and
// little-endian values. Shared by model checkpoints and optimizer state.
// ---------------------------------------------------------------------------

struct TensorFile {
  nlohmann::json meta;
  Sha256 vocab_sha{};
  std::vector<std::pair<std::string, Tensor>> tensors;
};

namespace detail {

inline constexpr char kMagic[8] = {'E', 'N', 'T', 'A', 'I', 'L', 'T', 'F'};
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 1;
inline constexpr std::uint8_t kDtypeF64 = 2;

static_assert(std::endian::native == std::endian::little,
              "tensor files assume a little-endian host");

template <class T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in, const std::string& what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointTruncatedError("truncated tensor file while reading " + what);
  return v;
}

inline void read_exact(std::ifstream& in, void* dst, std::size_t n, const std::string& what) {
  in.read(reinterpret_cast<char*>(dst), std::streamsize(n));
  if (!in || std::size_t(in.gcount()) != n) {
    throw CheckpointTruncatedError("truncated tensor file while reading " + what);
  }
}

}  // namespace detail

inline void write_tensor_file(const TensorFile& file, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(detail::kMagic, sizeof(detail::kMagic));
  detail::write_pod(out, detail::kFormatVersion);
  const std::string meta = file.meta.dump();
  detail::write_pod(out, std::uint32_t(meta.size()));
  out.write(meta.data(), std::streamsize(meta.size()));
  out.write(reinterpret_cast<const char*>(file.vocab_sha.data()),
            std::streamsize(file.vocab_sha.size()));
  detail::write_pod(out, std::uint32_t(file.tensors.size()));
  for (const auto& [name, tensor] : file.tensors) {
    detail::write_pod(out, std::uint16_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    detail::write_pod(out, sizeof(scalar) == 4 ? detail::kDtypeF32 : detail::kDtypeF64);
    detail::write_pod(out, std::uint8_t(tensor.rank()));
    for (std::size_t d : tensor.shape) detail::write_pod(out, std::uint64_t(d));
    out.write(reinterpret_cast<const char*>(tensor.v.data()),
              std::streamsize(tensor.v.size() * sizeof(scalar)));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

inline TensorFile read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  char magic[sizeof(detail::kMagic)];
  detail::read_exact(in, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, detail::kMagic, sizeof(magic)) != 0) {
    throw CheckpointVersionError(path.string() + ": not a tensor file (bad magic)");
  }
  const auto version = detail::read_pod<std::uint32_t>(in, "version");
  if (version != detail::kFormatVersion) {
    throw CheckpointVersionError(path.string() + ": format version " + std::to_string(version) +
                                 ", expected " + std::to_string(detail::kFormatVersion));
  }

  TensorFile file;
  const auto meta_len = detail::read_pod<std::uint32_t>(in, "metadata length");
  std::string meta(meta_len, '\0');
  detail::read_exact(in, meta.data(), meta_len, "metadata");
  file.meta = nlohmann::json::parse(meta, nullptr, false);
  if (file.meta.is_discarded()) {
    throw CheckpointVersionError(path.string() + ": unparseable metadata block");
  }
  detail::read_exact(in, file.vocab_sha.data(), file.vocab_sha.size(), "vocabulary hash");

  const auto count = detail::read_pod<std::uint32_t>(in, "tensor count");
  file.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = detail::read_pod<std::uint16_t>(in, "tensor name length");
    std::string name(name_len, '\0');
    detail::read_exact(in, name.data(), name_len, "tensor name");
    const auto dtype = detail::read_pod<std::uint8_t>(in, "dtype of " + name);
    if (dtype != detail::kDtypeF32 && dtype != detail::kDtypeF64) {
      throw CheckpointVersionError(path.string() + ": unknown dtype tag for " + name);
    }
    const auto rank = detail::read_pod<std::uint8_t>(in, "rank of " + name);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = detail::read_pod<std::uint64_t>(in, "shape of " + name);
    Tensor t(shape);
    if (dtype == (sizeof(scalar) == 4 ? detail::kDtypeF32 : detail::kDtypeF64)) {
      detail::read_exact(in, t.v.data(), t.v.size() * sizeof(scalar), "values of " + name);
    } else if (dtype == detail::kDtypeF32) {
      std::vector<float> raw(t.v.size());
      detail::read_exact(in, raw.data(), raw.size() * sizeof(float), "values of " + name);
      for (std::size_t k = 0; k < raw.size(); ++k) t.v[k] = scalar(raw[k]);
    } else {
      std::vector<double> raw(t.v.size());
      detail::read_exact(in, raw.data(), raw.size() * sizeof(double), "values of " + name);
      for (std::size_t k = 0; k < raw.size(); ++k) t.v[k] = scalar(raw[k]);
    }
    file.tensors.emplace_back(std::move(name), std::move(t));
  }
  return file;
}

}  // namespace entail
