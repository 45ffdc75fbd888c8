#pragma once

#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "entail/common.hpp"

namespace entail {

using Sentence = std::vector<std::string>;
using SentenceGenerator = std::function<Sentence(const Sentence&)>;

enum class StopReason { repeat, max_length };

inline const char* stop_reason_name(StopReason r) {
  return r == StopReason::repeat ? "repeat" : "max-length";
}

// Equality for the repeat rule: tokens joined by single spaces, case
// preserved. Tokens never contain whitespace, so this is token-wise equality.
inline std::string canonical_sentence(const Sentence& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ' ';
    out += s[i];
  }
  return out;
}

struct InferenceChain {
  std::vector<Sentence> sentences;  // pairwise distinct, starts with the seed
  StopReason stop = StopReason::max_length;
  // Canonical form of the output that triggered a repeat stop; equal to the
  // last sentence when the generator mapped it to itself.
  std::optional<std::string> repeated;
};

// Generator failure mid-chain, with the sentences produced so far attached.
class GeneratorError : public Error {
 public:
  GeneratorError(const std::string& msg, InferenceChain partial)
      : Error(msg), partial_(std::move(partial)) {}
  const InferenceChain& partial_chain() const { return partial_; }

 private:
  InferenceChain partial_;
};

// Repeatedly applies the generator starting from the seed; stops without
// appending when the next sentence already appears in the chain, or when the
// chain holds max_len sentences.
inline InferenceChain generate_chain(const Sentence& seed, const SentenceGenerator& generate,
                                     std::size_t max_len) {
  if (max_len < 1) throw ConfigError("generate_chain: max_len must be >= 1");
  if (seed.empty()) throw ConfigError("generate_chain: empty seed sentence");

  InferenceChain chain;
  std::set<std::string> seen;
  chain.sentences.push_back(seed);
  seen.insert(canonical_sentence(seed));
  while (true) {
    if (chain.sentences.size() >= max_len) {
      chain.stop = StopReason::max_length;
      return chain;
    }
    Sentence next;
    try {
      next = generate(chain.sentences.back());
    } catch (const std::exception& e) {
      throw GeneratorError(std::string("generator failed: ") + e.what(), std::move(chain));
    }
    if (next.empty()) {
      throw GeneratorError("generator produced an empty sentence", std::move(chain));
    }
    const std::string canon = canonical_sentence(next);
    if (seen.count(canon)) {
      chain.stop = StopReason::repeat;
      chain.repeated = canon;
      return chain;
    }
    seen.insert(canon);
    chain.sentences.push_back(std::move(next));
  }
}

// "seed -> generated -> ..." with the stop reason appended.
inline std::string format_chain(const InferenceChain& chain) {
  std::string out;
  for (std::size_t i = 0; i < chain.sentences.size(); ++i) {
    if (i) out += " -> ";
    out += canonical_sentence(chain.sentences[i]);
  }
  out += " [stop: ";
  out += stop_reason_name(chain.stop);
  out += ']';
  return out;
}

struct GraphNode {
  Sentence sentence;
  bool corpus_seed = false;
  // The generator mapped this sentence to itself; recorded as an attribute
  // rather than a self-loop edge.
  bool fixed_point = false;
};

struct EntailmentGraph {
  std::map<std::string, GraphNode> nodes;                 // keyed by canonical form
  std::set<std::pair<std::string, std::string>> edges;    // deduplicated generation steps
  std::vector<std::vector<std::string>> chains;           // per-chain canonical provenance
  std::vector<StopReason> chain_stops;
  std::size_t skipped_chains = 0;                         // generator failures
};

// Union of all chains' consecutive-pair edges over the seed corpus. A
// deterministic generator yields out-degree <= 1 everywhere; a violation is
// reported as a build error.
inline EntailmentGraph build_graph(const std::vector<Sentence>& seeds,
                                   const SentenceGenerator& generate, std::size_t max_len,
                                   std::ostream* log = nullptr) {
  if (seeds.empty()) throw ConfigError("build_graph: no seed sentences");
  EntailmentGraph graph;
  std::map<std::string, std::string> successor;

  for (const Sentence& seed : seeds) {
    InferenceChain chain;
    try {
      chain = generate_chain(seed, generate, max_len);
    } catch (const GeneratorError& e) {
      ++graph.skipped_chains;
      if (log != nullptr) {
        *log << "chain from '" << canonical_sentence(seed) << "' skipped: " << e.what() << '\n';
      }
      continue;
    }

    std::vector<std::string> canon_chain;
    canon_chain.reserve(chain.sentences.size());
    for (std::size_t i = 0; i < chain.sentences.size(); ++i) {
      const std::string canon = canonical_sentence(chain.sentences[i]);
      canon_chain.push_back(canon);
      auto [it, inserted] = graph.nodes.try_emplace(canon);
      if (inserted) it->second.sentence = chain.sentences[i];
      if (i == 0) it->second.corpus_seed = true;
    }
    if (chain.repeated && *chain.repeated == canon_chain.back()) {
      graph.nodes[canon_chain.back()].fixed_point = true;
    }
    for (std::size_t i = 0; i + 1 < canon_chain.size(); ++i) {
      const std::string& from = canon_chain[i];
      const std::string& to = canon_chain[i + 1];
      auto [it, inserted] = successor.try_emplace(from, to);
      if (!inserted && it->second != to) {
        throw Error("build_graph: node '" + from + "' has two successors ('" + it->second +
                    "' and '" + to + "'); generator is not deterministic");
      }
      graph.edges.emplace(from, to);
    }
    graph.chains.push_back(std::move(canon_chain));
    graph.chain_stops.push_back(chain.stop);
  }
  return graph;
}

struct GraphStats {
  std::size_t node_count = 0;
  std::size_t edge_count = 0;
  std::size_t convergence_nodes = 0;  // in-degree >= 2: shared-meaning sentences
  std::size_t fixed_points = 0;
  std::size_t longest_chain = 0;      // max stored chain length, in sentences
  std::size_t skipped_chains = 0;
  std::map<std::size_t, std::size_t> in_degree_histogram;
  std::vector<std::size_t> component_sizes;  // weakly connected, descending

  nlohmann::json to_json() const {
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [deg, n] : in_degree_histogram) hist[std::to_string(deg)] = n;
    return {{"nodes", node_count},
            {"edges", edge_count},
            {"convergence_nodes", convergence_nodes},
            {"fixed_points", fixed_points},
            {"longest_chain", longest_chain},
            {"skipped_chains", skipped_chains},
            {"in_degree_histogram", hist},
            {"component_sizes", component_sizes}};
  }
};

inline GraphStats graph_stats(const EntailmentGraph& graph) {
  GraphStats stats;
  stats.node_count = graph.nodes.size();
  stats.edge_count = graph.edges.size();
  stats.skipped_chains = graph.skipped_chains;
  for (const auto& chain : graph.chains) {
    stats.longest_chain = std::max(stats.longest_chain, chain.size());
  }

  std::map<std::string, std::size_t> in_degree;
  for (const auto& [canon, node] : graph.nodes) in_degree[canon] = 0;
  for (const auto& [from, to] : graph.edges) ++in_degree[to];
  for (const auto& [canon, deg] : in_degree) {
    ++stats.in_degree_histogram[deg];
    if (deg >= 2) ++stats.convergence_nodes;
  }
  for (const auto& [canon, node] : graph.nodes) {
    if (node.fixed_point) ++stats.fixed_points;
  }

  // weakly connected components via union-find
  std::map<std::string, std::size_t> index;
  for (const auto& [canon, node] : graph.nodes) index.emplace(canon, index.size());
  std::vector<std::size_t> parent(index.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [from, to] : graph.edges) {
    const std::size_t a = find(index.at(from)), b = find(index.at(to));
    if (a != b) parent[a] = b;
  }
  std::map<std::size_t, std::size_t> sizes;
  for (std::size_t i = 0; i < parent.size(); ++i) ++sizes[find(i)];
  for (const auto& [root, n] : sizes) stats.component_sizes.push_back(n);
  std::sort(stats.component_sizes.rbegin(), stats.component_sizes.rend());
  return stats;
}

namespace detail {

inline std::string dot_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace detail

// DOT digraph with seed nodes filled and fixed points double-bordered.
// Output order follows the canonical sentence sort, so exports are
// byte-stable.
inline void export_graph_dot(const EntailmentGraph& graph, std::ostream& out) {
  out << "digraph entailment {\n";
  out << "  node [shape=box fontsize=10];\n";
  for (const auto& [canon, node] : graph.nodes) {
    out << "  \"" << detail::dot_escape(canon) << "\"";
    std::vector<std::string> attrs;
    if (node.corpus_seed) attrs.push_back("style=filled fillcolor=lightblue");
    if (node.fixed_point) attrs.push_back("peripheries=2");
    if (!attrs.empty()) {
      out << " [";
      for (std::size_t i = 0; i < attrs.size(); ++i) {
        if (i) out << ' ';
        out << attrs[i];
      }
      out << ']';
    }
    out << ";\n";
  }
  for (const auto& [from, to] : graph.edges) {
    out << "  \"" << detail::dot_escape(from) << "\" -> \"" << detail::dot_escape(to)
        << "\";\n";
  }
  out << "}\n";
}

// Nodes, then edges, then per-chain provenance, one JSON object per line.
inline void export_graph_jsonl(const EntailmentGraph& graph, std::ostream& out) {
  for (const auto& [canon, node] : graph.nodes) {
    nlohmann::json j{{"type", "node"},
                     {"sentence", canon},
                     {"seed", node.corpus_seed},
                     {"fixed_point", node.fixed_point}};
    out << j.dump() << '\n';
  }
  for (const auto& [from, to] : graph.edges) {
    out << nlohmann::json{{"type", "edge"}, {"from", from}, {"to", to}}.dump() << '\n';
  }
  for (std::size_t i = 0; i < graph.chains.size(); ++i) {
    nlohmann::json j{{"type", "chain"},
                     {"sentences", graph.chains[i]},
                     {"stop", stop_reason_name(graph.chain_stops[i])}};
    out << j.dump() << '\n';
  }
}

}  // namespace entail
