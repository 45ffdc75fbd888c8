#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "entail/common.hpp"

namespace entail {

// Token <-> id bijection. Ids 0..3 are reserved for the specials; corpus
// tokens follow in descending-frequency order (ties broken lexicographically)
// so that rebuilding from the same corpus is reproducible.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr std::size_t kSpecialCount = 4;

  Vocabulary() {
    for (const char* s : {"<pad>", "<bos>", "<eos>", "<unk>"}) add(s);
  }

  // Counts must come from the training split only.
  static Vocabulary from_counts(const std::map<std::string, std::size_t>& counts,
                                std::size_t min_count) {
    if (counts.empty()) throw ConfigError("vocabulary: empty token counts");
    std::vector<std::pair<std::string, std::size_t>> kept;
    kept.reserve(counts.size());
    for (const auto& [token, n] : counts) {
      check_corpus_token(token);
      if (n >= min_count) kept.emplace_back(token, n);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    Vocabulary v;
    for (const auto& [token, n] : kept) v.add(token);
    return v;
  }

  std::size_t size() const { return id_to_token_.size(); }

  bool contains(const std::string& token) const {
    return token_to_id_.find(token) != token_to_id_.end();
  }

  // Unknown tokens map to UNK.
  int id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
  }

  const std::string& token(int id) const {
    if (id < 0 || std::size_t(id) >= id_to_token_.size()) {
      throw ConfigError("vocabulary: id " + std::to_string(id) + " out of range");
    }
    return id_to_token_[std::size_t(id)];
  }

  // BOS + ids + EOS. An empty token list yields [BOS, EOS].
  std::vector<int> encode(std::span<const std::string> tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size() + 2);
    ids.push_back(kBos);
    for (const std::string& t : tokens) ids.push_back(id(t));
    ids.push_back(kEos);
    return ids;
  }

  // Inverse of encode modulo framing: PAD/BOS/EOS are dropped.
  std::vector<std::string> decode(std::span<const int> ids) const {
    std::vector<std::string> tokens;
    for (int i : ids) {
      if (i == kPad || i == kBos || i == kEos) continue;
      tokens.push_back(token(i));
    }
    return tokens;
  }

  const std::vector<std::string>& tokens() const { return id_to_token_; }

  // One token per line after a header naming the specials; the token on the
  // k-th body line has id k + 3.
  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write vocabulary file " + path.string());
    out << "#specials";
    for (std::size_t i = 0; i < kSpecialCount; ++i) out << ' ' << id_to_token_[i];
    out << '\n';
    for (std::size_t i = kSpecialCount; i < id_to_token_.size(); ++i) {
      out << id_to_token_[i] << '\n';
    }
  }

  static Vocabulary load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read vocabulary file " + path.string());
    std::string header;
    if (!std::getline(in, header) || header.rfind("#specials", 0) != 0) {
      throw FormatError("vocabulary file " + path.string() + ": missing #specials header");
    }
    Vocabulary v;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) {
        throw FormatError("vocabulary file " + path.string() + ": empty token at line " +
                          std::to_string(line_no));
      }
      if (v.contains(line)) {
        throw FormatError("vocabulary file " + path.string() + ": duplicate token at line " +
                          std::to_string(line_no));
      }
      try {
        check_corpus_token(line);
      } catch (const Error& e) {
        throw FormatError("vocabulary file " + path.string() + " line " +
                          std::to_string(line_no) + ": " + e.what());
      }
      v.add(line);
    }
    return v;
  }

  // Corpus tokens may not be empty, contain whitespace, or shadow a special.
  // The tokenizer cannot produce such tokens; hand-written files can.
  static void check_corpus_token(const std::string& token) {
    if (token.empty()) throw ConfigError("vocabulary: empty token");
    for (char c : token) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        throw ConfigError("vocabulary: token '" + token + "' contains whitespace");
      }
    }
    for (const char* s : {"<pad>", "<bos>", "<eos>", "<unk>"}) {
      if (token == s) {
        throw ConfigError("vocabulary: corpus token collides with special '" + token + "'");
      }
    }
  }

 private:
  void add(const std::string& token) {
    token_to_id_.emplace(token, int(id_to_token_.size()));
    id_to_token_.push_back(token);
  }

  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

}  // namespace entail
