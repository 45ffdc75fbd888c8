#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "entail/common.hpp"
#include "entail/tensor.hpp"
#include "entail/vocab.hpp"

namespace entail {

enum class VectorFormat { binary, text, autodetect };

struct WordVectors {
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<float>> table;
};

namespace detail {

inline VectorFormat detect_format(const std::filesystem::path& path) {
  return path.extension() == ".bin" ? VectorFormat::binary : VectorFormat::text;
}

// A text file may carry the conventional "count dim" header line; it is
// recognized when the first line is exactly two integers.
inline bool looks_like_header(const std::string& line, std::size_t& count, std::size_t& dim) {
  std::istringstream is(line);
  long long a = -1, b = -1;
  std::string extra;
  if (!(is >> a >> b) || (is >> extra) || a < 0 || b <= 0) return false;
  count = std::size_t(a);
  dim = std::size_t(b);
  return true;
}

}  // namespace detail

// Binary layout: header "count dim\n", then per word: token bytes, one
// space, dim little-endian 32-bit floats. A trailing newline after the
// floats (as written by common word2vec exporters) is tolerated.
inline WordVectors load_word_vectors_binary(const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little,
                "binary vector files assume a little-endian host");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vector file " + path.string());

  std::string header;
  if (!std::getline(in, header)) {
    throw FormatError(path.string() + ": missing header at byte 0");
  }
  std::size_t count = 0, dim = 0;
  if (!detail::looks_like_header(header, count, dim)) {
    throw FormatError(path.string() + ": unparseable header '" + header + "' at byte 0");
  }

  WordVectors vecs;
  vecs.dim = dim;
  vecs.table.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    std::string token;
    char c;
    while (in.get(c) && (c == '\n' || c == '\r')) {
    }
    if (!in) {
      throw FormatError(path.string() + ": truncated at byte " + std::to_string(in.tellg()) +
                        " (header promised " + std::to_string(count) + " words, got " +
                        std::to_string(w) + ")");
    }
    token.push_back(c);
    while (in.get(c) && c != ' ') token.push_back(c);
    std::vector<float> values(dim);
    in.read(reinterpret_cast<char*>(values.data()), std::streamsize(dim * sizeof(float)));
    if (!in) {
      throw FormatError(path.string() + ": truncated vector for '" + token + "' near byte " +
                        std::to_string(in.tellg()));
    }
    vecs.table.emplace(std::move(token), std::move(values));
  }
  return vecs;
}

// Text layout: "token v1 ... vd" per line, optional "count dim" header.
inline WordVectors load_word_vectors_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vector file " + path.string());

  WordVectors vecs;
  std::string line;
  std::size_t line_no = 0;
  std::size_t declared_count = 0;
  bool has_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      std::size_t count = 0, dim = 0;
      if (detail::looks_like_header(line, count, dim)) {
        has_header = true;
        declared_count = count;
        vecs.dim = dim;
        continue;
      }
    }
    std::istringstream is(line);
    std::string token;
    if (!(is >> token)) continue;
    std::vector<float> values;
    float x;
    while (is >> x) values.push_back(x);
    if (!is.eof()) {
      throw FormatError(path.string() + " line " + std::to_string(line_no) +
                        ": unparseable vector component");
    }
    if (values.empty()) {
      throw FormatError(path.string() + " line " + std::to_string(line_no) +
                        ": no vector components");
    }
    if (vecs.dim == 0) vecs.dim = values.size();
    if (values.size() != vecs.dim) {
      throw FormatError(path.string() + " line " + std::to_string(line_no) +
                        ": dimension " + std::to_string(values.size()) + " != " +
                        std::to_string(vecs.dim));
    }
    vecs.table.emplace(std::move(token), std::move(values));
  }
  if (has_header && vecs.table.size() != declared_count) {
    throw FormatError(path.string() + ": header promised " + std::to_string(declared_count) +
                      " words, file has " + std::to_string(vecs.table.size()));
  }
  if (vecs.table.empty()) throw FormatError(path.string() + ": no vectors");
  return vecs;
}

inline WordVectors load_word_vectors(const std::filesystem::path& path,
                                     VectorFormat format = VectorFormat::autodetect) {
  if (format == VectorFormat::autodetect) format = detail::detect_format(path);
  return format == VectorFormat::binary ? load_word_vectors_binary(path)
                                        : load_word_vectors_text(path);
}

inline void save_word_vectors(const WordVectors& vecs, const std::filesystem::path& path,
                              VectorFormat format) {
  if (format == VectorFormat::autodetect) format = detail::detect_format(path);
  // Sorted for reproducible files.
  std::vector<const std::string*> tokens;
  tokens.reserve(vecs.table.size());
  for (const auto& [token, v] : vecs.table) tokens.push_back(&token);
  std::sort(tokens.begin(), tokens.end(),
            [](const std::string* a, const std::string* b) { return *a < *b; });

  if (format == VectorFormat::binary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write vector file " + path.string());
    out << vecs.table.size() << ' ' << vecs.dim << '\n';
    for (const std::string* token : tokens) {
      const auto& v = vecs.table.at(*token);
      out << *token << ' ';
      out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(float)));
    }
  } else {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write vector file " + path.string());
    out << vecs.table.size() << ' ' << vecs.dim << '\n';
    for (const std::string* token : tokens) {
      out << *token;
      for (float x : vecs.table.at(*token)) out << ' ' << x;
      out << '\n';
    }
  }
}

// ---------------------------------------------------------------------------

struct EmbeddingMatrix {
  Tensor weights;                       // [vocab x dim]
  std::vector<std::uint8_t> pretrained; // per-row provenance flag
  // Random rows / total rows, specials excluded from the statistic.
  double oov_fraction = 0.0;
};

inline constexpr double kOovInitBound = 1.7320508075688772;  // sqrt(3)

// Vocabulary rows found in the pre-trained table copy their vector; all
// others (always including the four specials) are sampled i.i.d. uniform
// over [-sqrt(3), sqrt(3)], which has unit variance.
inline EmbeddingMatrix init_embedding_matrix(const Vocabulary& vocab, const WordVectors* vectors,
                                             std::size_t random_dim, std::uint64_t seed) {
  const std::size_t dim = (vectors != nullptr) ? vectors->dim : random_dim;
  if (dim == 0) throw ConfigError("init_embedding_matrix: embedding dimension must be >= 1");

  EmbeddingMatrix m;
  m.weights = Tensor::zeros({vocab.size(), dim});
  m.pretrained.assign(vocab.size(), 0);

  Rng rng(derive_seed(seed, "embedding-init"));
  std::size_t random_rows = 0;
  for (std::size_t row = 0; row < vocab.size(); ++row) {
    const std::string& token = vocab.token(int(row));
    const bool special = row < Vocabulary::kSpecialCount;
    const std::vector<float>* pre = nullptr;
    if (!special && vectors != nullptr) {
      auto it = vectors->table.find(token);
      if (it != vectors->table.end()) pre = &it->second;
    }
    if (pre != nullptr) {
      for (std::size_t c = 0; c < dim; ++c) m.weights.at(row, c) = scalar((*pre)[c]);
      m.pretrained[row] = 1;
    } else {
      for (std::size_t c = 0; c < dim; ++c) {
        m.weights.at(row, c) = scalar(rng.uniform(-kOovInitBound, kOovInitBound));
      }
      if (!special) ++random_rows;
    }
  }
  const std::size_t corpus_rows = vocab.size() - Vocabulary::kSpecialCount;
  m.oov_fraction = corpus_rows == 0 ? 0.0 : double(random_rows) / double(corpus_rows);
  return m;
}

}  // namespace entail
