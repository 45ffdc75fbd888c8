#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "entail/common.hpp"

namespace entail {

struct BleuReport {
  double bleu = 0.0;                    // [0, 100]
  std::array<double, 4> precisions{};   // corpus-level clipped p1..p4
  double brevity_penalty = 1.0;
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;

  nlohmann::json to_json() const {
    return {{"bleu", bleu},
            {"precisions", precisions},
            {"brevity_penalty", brevity_penalty},
            {"candidate_length", candidate_length},
            {"reference_length", reference_length}};
  }
};

namespace detail {

// n-grams keyed by separator-joined tokens; '\x1f' cannot occur inside a
// token (the tokenizer never emits control characters from text splits).
inline std::map<std::string, std::size_t> ngram_counts(const std::vector<std::string>& tokens,
                                                       std::size_t n) {
  std::map<std::string, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t k = 1; k < n; ++k) {
      key += '\x1f';
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace detail

// Corpus-level BLEU-4: clipped n-gram precisions, geometric mean, brevity
// penalty exp(1 - r/c) when c < r. One reference per candidate.
//
// Orders with no candidate n-grams at all (corpus of very short sentences)
// are vacuous and drop out of the geometric mean, so a corpus identical to
// its references always scores 100. Any included precision of 0 makes the
// score 0; there is no smoothing.
inline BleuReport corpus_bleu(const std::vector<std::vector<std::string>>& candidates,
                              const std::vector<std::vector<std::string>>& references) {
  if (candidates.empty()) throw ConfigError("corpus_bleu: empty corpus");
  if (candidates.size() != references.size()) {
    throw ConfigError("corpus_bleu: " + std::to_string(candidates.size()) + " candidates vs " +
                      std::to_string(references.size()) + " references");
  }

  BleuReport report;
  std::array<std::size_t, 4> matched{}, total{};
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    report.candidate_length += candidates[i].size();
    report.reference_length += references[i].size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto cand = detail::ngram_counts(candidates[i], n);
      const auto ref = detail::ngram_counts(references[i], n);
      for (const auto& [gram, count] : cand) {
        total[n - 1] += count;
        auto it = ref.find(gram);
        if (it != ref.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }

  double log_sum = 0.0;
  std::size_t included = 0;
  bool zero_precision = false;
  for (std::size_t n = 0; n < 4; ++n) {
    if (total[n] == 0) {
      report.precisions[n] = 0.0;  // vacuous order, excluded from the mean
      continue;
    }
    report.precisions[n] = double(matched[n]) / double(total[n]);
    ++included;
    if (matched[n] == 0) {
      zero_precision = true;
    } else {
      log_sum += std::log(report.precisions[n]);
    }
  }

  if (report.candidate_length == 0) {
    report.brevity_penalty = 0.0;
    report.bleu = 0.0;
    return report;
  }
  report.brevity_penalty =
      report.candidate_length >= report.reference_length
          ? 1.0
          : std::exp(1.0 - double(report.reference_length) / double(report.candidate_length));
  if (zero_precision || included == 0) {
    report.bleu = 0.0;
  } else {
    report.bleu = 100.0 * report.brevity_penalty * std::exp(log_sum / double(included));
  }
  return report;
}

}  // namespace entail
