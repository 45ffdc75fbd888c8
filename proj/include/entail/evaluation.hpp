#pragma once

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "entail/bleu.hpp"
#include "entail/common.hpp"
#include "entail/corpus.hpp"

namespace entail {

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

// Writes a seeded random sample of n items as JSONL records
//   {"index", "source", "gold_target", "generated", "verdict": null}
// for manual yes/no annotation; the tally below reads the filled file back.
inline void export_annotation_sample(const Dataset& pairs,
                                     const std::vector<std::vector<std::string>>& generated,
                                     std::size_t n, std::uint64_t seed,
                                     const std::filesystem::path& path) {
  if (generated.size() != pairs.size()) {
    throw ConfigError("annotation sample: outputs not aligned with pairs");
  }
  if (n > pairs.size()) {
    throw ConfigError("annotation sample: asked for " + std::to_string(n) + " of " +
                      std::to_string(pairs.size()) + " items");
  }
  std::vector<std::size_t> indices(pairs.size());
  std::iota(indices.begin(), indices.end(), std::size_t(0));
  Rng rng(derive_seed(seed, "annotation-sample"));
  rng.shuffle(indices);
  indices.resize(n);
  std::sort(indices.begin(), indices.end());

  std::ofstream out(path);
  if (!out) throw IoError("cannot write annotation file " + path.string());
  for (std::size_t i : indices) {
    nlohmann::json j{{"index", i},
                     {"source", join_tokens(pairs[i].source)},
                     {"gold_target", join_tokens(pairs[i].target)},
                     {"generated", join_tokens(generated[i])},
                     {"verdict", nullptr}};
    out << j.dump() << '\n';
  }
}

struct TallyResult {
  std::size_t yes = 0;
  std::size_t no = 0;
  double accuracy_percent = 0.0;

  nlohmann::json to_json() const {
    return {{"yes", yes}, {"no", no}, {"accuracy_percent", accuracy_percent}};
  }
};

// Reads back human-filled verdicts ("yes"/"no") and reports the fraction of
// generated sentences judged as entailed. Unfilled or unrecognized verdicts
// abort with all offending line numbers.
inline TallyResult tally_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotation file " + path.string());
  TallyResult result;
  std::vector<std::size_t> bad_lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("verdict")) {
      bad_lines.push_back(line_no);
      continue;
    }
    const auto& verdict = j["verdict"];
    if (verdict.is_string() && verdict.get<std::string>() == "yes") {
      ++result.yes;
    } else if (verdict.is_string() && verdict.get<std::string>() == "no") {
      ++result.no;
    } else {
      bad_lines.push_back(line_no);
    }
  }
  if (!bad_lines.empty()) {
    std::ostringstream os;
    os << path.string() << ": unfilled or invalid verdicts on lines";
    for (std::size_t l : bad_lines) os << ' ' << l;
    throw FormatError(os.str());
  }
  if (result.yes + result.no == 0) {
    throw FormatError(path.string() + ": no annotation records");
  }
  result.accuracy_percent = 100.0 * double(result.yes) / double(result.yes + result.no);
  return result;
}

}  // namespace entail
