#pragma once

// SNLI-format corpus generator for tests: entailment pairs follow a fixed
// simplification rule (drop the adjective and the trailing location phrase),
// so a model can actually learn the mapping; neutral/contradiction records
// and unlabeled ("-") records exercise the filtering path with exact counts.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "entail/common.hpp"
#include "entail/corpus.hpp"

namespace entail::test {

struct SyntheticSplitSpec {
  std::size_t entailment = 0;
  std::size_t other = 0;      // neutral/contradiction, alternating
  std::size_t unlabeled = 0;  // gold_label "-"
};

struct SyntheticSnliSpec {
  SyntheticSplitSpec train, dev, test;
  std::uint64_t seed = 1;
};

namespace detail {

inline const std::vector<std::string>& nouns() {
  static const std::vector<std::string> v = {"dog",  "cat",   "man",   "woman",  "bird",
                                             "horse", "kid",  "chef",  "runner", "artist",
                                             "boy",   "girl", "rider", "player", "singer"};
  return v;
}

inline const std::vector<std::string>& verbs() {
  static const std::vector<std::string> v = {"runs",  "sleeps", "eats",  "jumps", "sings",
                                             "waits", "plays",  "swims", "reads", "walks",
                                             "rests", "stands", "sits",  "smiles"};
  return v;
}

inline const std::vector<std::string>& adjectives() {
  static const std::vector<std::string> v = {"big",   "small", "happy", "old",
                                             "young", "tired", "quiet", "loud"};
  return v;
}

inline const std::vector<std::string>& places() {
  static const std::vector<std::string> v = {"park",  "street", "house", "field",
                                             "beach", "garden", "yard"};
  return v;
}

inline void write_split(const std::filesystem::path& path, const SyntheticSplitSpec& spec,
                        Rng& rng) {
  std::vector<std::string> lines;
  auto pick = [&rng](const std::vector<std::string>& v) { return v[rng.below(v.size())]; };
  for (std::size_t i = 0; i < spec.entailment; ++i) {
    const std::string noun = pick(nouns()), verb = pick(verbs());
    nlohmann::json j{
        {"gold_label", "entailment"},
        {"sentence1",
         "The " + pick(adjectives()) + " " + noun + " " + verb + " in the " + pick(places()) + "."},
        {"sentence2", "The " + noun + " " + verb + "."}};
    lines.push_back(j.dump());
  }
  for (std::size_t i = 0; i < spec.other; ++i) {
    const std::string noun = pick(nouns());
    nlohmann::json j{{"gold_label", i % 2 ? "neutral" : "contradiction"},
                     {"sentence1", "A " + noun + " " + pick(verbs()) + "."},
                     {"sentence2", "A " + noun + " never " + pick(verbs()) + "."}};
    lines.push_back(j.dump());
  }
  for (std::size_t i = 0; i < spec.unlabeled; ++i) {
    nlohmann::json j{{"gold_label", "-"},
                     {"sentence1", "Unjudged " + pick(nouns()) + "."},
                     {"sentence2", "Unjudged " + pick(verbs()) + "."}};
    lines.push_back(j.dump());
  }
  rng.shuffle(lines);
  std::ofstream out(path);
  for (const std::string& l : lines) out << l << '\n';
}

}  // namespace detail

inline void write_synthetic_snli(const std::filesystem::path& dir, const SyntheticSnliSpec& spec) {
  std::filesystem::create_directories(dir);
  Rng rng(derive_seed(spec.seed, "synthetic-snli"));
  detail::write_split(dir / "snli_1.0_train.jsonl", spec.train, rng);
  detail::write_split(dir / "snli_1.0_dev.jsonl", spec.dev, rng);
  detail::write_split(dir / "snli_1.0_test.jsonl", spec.test, rng);
}

// The same corpus as an in-memory dataset, bypassing the file roundtrip.
inline Dataset synthetic_pairs(std::size_t count, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "synthetic-pairs"));
  auto pick = [&rng](const std::vector<std::string>& v) { return v[rng.below(v.size())]; };
  Dataset ds;
  for (std::size_t i = 0; i < count; ++i) {
    const std::string noun = pick(detail::nouns()), verb = pick(detail::verbs());
    SentencePair p;
    p.source = {"The", pick(detail::adjectives()), noun, verb, "in", "the",
                pick(detail::places()), "."};
    p.target = {"The", noun, verb, "."};
    ds.push_back(std::move(p));
  }
  return ds;
}

}  // namespace entail::test
