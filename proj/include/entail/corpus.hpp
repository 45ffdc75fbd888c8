#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "entail/common.hpp"
#include "entail/tokenizer.hpp"
#include "entail/vocab.hpp"

namespace entail {

enum class Split { train, dev, test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    default: return "test";
  }
}

// One (premise -> hypothesis) generation example, already tokenized.
struct SentencePair {
  std::vector<std::string> source;
  std::vector<std::string> target;
  Split split = Split::train;

  bool operator==(const SentencePair& o) const {
    return source == o.source && target == o.target;
  }
};

using Dataset = std::vector<SentencePair>;

struct LabeledPair {
  std::string label;
  std::string premise;
  std::string hypothesis;
};

// One SNLI JSONL record. Unlabeled records (gold_label "-") return nullopt;
// malformed input raises FormatError naming the line.
inline std::optional<LabeledPair> parse_snli_record(std::string_view line, std::size_t line_no) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw FormatError("line " + std::to_string(line_no) + ": malformed JSON record");
  }
  for (const char* field : {"gold_label", "sentence1", "sentence2"}) {
    if (!j.contains(field) || !j[field].is_string()) {
      throw FormatError("line " + std::to_string(line_no) + ": missing field '" + field + "'");
    }
  }
  LabeledPair p{j["gold_label"].get<std::string>(), j["sentence1"].get<std::string>(),
                j["sentence2"].get<std::string>()};
  if (p.label == "-") return std::nullopt;
  return p;
}

struct SnliFile {
  std::vector<LabeledPair> records;
  std::size_t skipped_unlabeled = 0;
};

inline SnliFile read_snli_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open SNLI file " + path.string());
  SnliFile file;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto rec = parse_snli_record(line, line_no);
      if (rec) {
        file.records.push_back(std::move(*rec));
      } else {
        ++file.skipped_unlabeled;
      }
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  }
  return file;
}

// Keeps exactly the entailment-labeled records, in input order.
inline std::vector<LabeledPair> filter_entailment(const std::vector<LabeledPair>& records) {
  std::vector<LabeledPair> kept;
  kept.reserve(records.size());
  for (const LabeledPair& r : records) {
    if (r.label == "entailment") kept.push_back(r);
  }
  return kept;
}

// Tokenizes filtered records into a dataset. Records with an empty premise or
// hypothesis are counted and skipped rather than aborting the run.
inline Dataset tokenize_pairs(const std::vector<LabeledPair>& records, Split split,
                              const TokenizerOptions& options = {},
                              std::size_t* skipped_empty = nullptr) {
  Dataset ds;
  ds.reserve(records.size());
  std::size_t skipped = 0;
  for (const LabeledPair& r : records) {
    try {
      SentencePair pair;
      pair.source = tokenize(r.premise, options);
      pair.target = tokenize(r.hypothesis, options);
      pair.split = split;
      ds.push_back(std::move(pair));
    } catch (const FormatError&) {
      ++skipped;
    }
  }
  if (skipped_empty != nullptr) *skipped_empty = skipped;
  return ds;
}

// (s, t) -> (t, s) for every pair; applying twice is the identity.
inline Dataset swap_direction(Dataset ds) {
  for (SentencePair& p : ds) std::swap(p.source, p.target);
  return ds;
}

inline std::map<std::string, std::size_t> count_tokens(const Dataset& ds) {
  std::map<std::string, std::size_t> counts;
  for (const SentencePair& p : ds) {
    for (const std::string& t : p.source) ++counts[t];
    for (const std::string& t : p.target) ++counts[t];
  }
  return counts;
}

// min_count filters rare tokens; the dataset must be the training split.
inline Vocabulary build_vocabulary(const Dataset& train, std::size_t min_count = 1) {
  if (train.empty()) throw ConfigError("build_vocabulary: empty dataset");
  return Vocabulary::from_counts(count_tokens(train), min_count);
}

struct DatasetStats {
  std::size_t train_pairs = 0;
  std::size_t dev_pairs = 0;
  std::size_t test_pairs = 0;
  std::size_t vocab_size = 0;
  // Fraction of token occurrences (all splits) that fall outside the
  // vocabulary, i.e. that the model sees as UNK.
  double oov_fraction = 0.0;

  nlohmann::json to_json() const {
    return {{"train_pairs", train_pairs}, {"dev_pairs", dev_pairs},
            {"test_pairs", test_pairs},   {"vocab_size", vocab_size},
            {"oov_fraction", oov_fraction}};
  }

  static DatasetStats from_json(const nlohmann::json& j) {
    DatasetStats s;
    s.train_pairs = j.at("train_pairs").get<std::size_t>();
    s.dev_pairs = j.at("dev_pairs").get<std::size_t>();
    s.test_pairs = j.at("test_pairs").get<std::size_t>();
    s.vocab_size = j.at("vocab_size").get<std::size_t>();
    s.oov_fraction = j.at("oov_fraction").get<double>();
    return s;
  }
};

inline double unk_fraction(const Dataset& ds, const Vocabulary& vocab) {
  std::size_t total = 0, unknown = 0;
  for (const SentencePair& p : ds) {
    for (const auto* side : {&p.source, &p.target}) {
      for (const std::string& t : *side) {
        ++total;
        if (!vocab.contains(t)) ++unknown;
      }
    }
  }
  return total == 0 ? 0.0 : double(unknown) / double(total);
}

// ---------------------------------------------------------------------------
// dataset files: JSONL of {"source": [tokens], "target": [tokens]}
// ---------------------------------------------------------------------------

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset file " + path.string());
  for (const SentencePair& p : ds) {
    nlohmann::json j{{"source", p.source}, {"target", p.target}};
    out << j.dump() << '\n';
  }
}

inline Dataset load_dataset(const std::filesystem::path& path, Split split = Split::train) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file " + path.string());
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("source") || !j.contains("target")) {
      throw FormatError(path.string() + " line " + std::to_string(line_no) +
                        ": expected {\"source\": [...], \"target\": [...]}");
    }
    SentencePair p;
    p.source = j["source"].get<std::vector<std::string>>();
    p.target = j["target"].get<std::vector<std::string>>();
    p.split = split;
    if (p.source.empty() || p.target.empty()) {
      throw FormatError(path.string() + " line " + std::to_string(line_no) +
                        ": empty token sequence");
    }
    for (const auto* side : {&p.source, &p.target}) {
      for (const std::string& t : *side) {
        if (t.empty() || t.find_first_of(" \t\n\r") != std::string::npos) {
          throw FormatError(path.string() + " line " + std::to_string(line_no) +
                            ": token '" + t + "' is empty or contains whitespace");
        }
      }
    }
    ds.push_back(std::move(p));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// batching
// ---------------------------------------------------------------------------

// Encoded, right-padded batch. Rows are BOS ... EOS framed id sequences,
// padded with PAD to the batch maximum; mask marks real tokens.
struct Batch {
  std::vector<std::vector<int>> source, target;
  std::vector<std::vector<std::uint8_t>> source_mask, target_mask;

  std::size_t size() const { return source.size(); }
};

namespace detail {

inline void pad_rows(std::vector<std::vector<int>>& rows,
                     std::vector<std::vector<std::uint8_t>>& masks) {
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.size());
  masks.clear();
  for (auto& r : rows) {
    masks.emplace_back(r.size(), std::uint8_t(1));
    masks.back().resize(width, 0);
    r.resize(width, Vocabulary::kPad);
  }
}

}  // namespace detail

// shuffle_seed nullopt keeps dataset order; otherwise the order is the
// deterministic permutation drawn from that seed. The last batch may be short.
inline std::vector<Batch> make_batches(const Dataset& ds, const Vocabulary& vocab,
                                       std::size_t batch_size,
                                       std::optional<std::uint64_t> shuffle_seed = {}) {
  if (batch_size == 0) throw ConfigError("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) order[i] = i;
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    rng.shuffle(order);
  }
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    Batch b;
    const std::size_t end = std::min(start + batch_size, ds.size());
    for (std::size_t i = start; i < end; ++i) {
      const SentencePair& p = ds[order[i]];
      b.source.push_back(vocab.encode(p.source));
      b.target.push_back(vocab.encode(p.target));
    }
    detail::pad_rows(b.source, b.source_mask);
    detail::pad_rows(b.target, b.target_mask);
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace entail
