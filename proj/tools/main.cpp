// entail: train an attentive encoder-decoder LSTM on SNLI entailment pairs,
// generate entailed sentences, build inference chains and entailment graphs.
//
// Subcommands: prepare, train, generate, chain, eval. Every run writes a
// manifest-<subcommand>.json next to its outputs with the fully resolved
// configuration, so runs can be reproduced from the manifest alone.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "entail/chains.hpp"
#include "entail/corpus.hpp"
#include "entail/embeddings.hpp"
#include "entail/evaluation.hpp"
#include "entail/parallel.hpp"
#include "entail/seq2seq.hpp"
#include "entail/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string iso_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Manifest {
 public:
  Manifest(std::string subcommand, fs::path dir)
      : dir_(std::move(dir)), data_{{"subcommand", std::move(subcommand)},
                                    {"tool_version", entail::kToolVersion},
                                    {"started", iso_timestamp()},
                                    {"inputs", json::object()},
                                    {"outputs", json::object()},
                                    {"config", json::object()}} {}

  void input(const std::string& key, const std::string& value) { data_["inputs"][key] = value; }
  void output(const std::string& key, const std::string& value) {
    data_["outputs"][key] = value;
  }
  void config(const json& j) { data_["config"] = j; }
  void note(const std::string& key, const json& j) { data_[key] = j; }

  void write() {
    data_["finished"] = iso_timestamp();
    fs::create_directories(dir_);
    const fs::path path =
        dir_ / ("manifest-" + data_["subcommand"].get<std::string>() + ".json");
    std::ofstream out(path);
    if (!out) throw entail::IoError("cannot write manifest " + path.string());
    out << data_.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  json data_;
};

entail::TokenizerOptions tokenizer_options(bool lowercase) {
  entail::TokenizerOptions opts;
  opts.lowercase = lowercase;
  return opts;
}

std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

bool blank(const std::string& s) {
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

struct PrepareArgs {
  std::string snli_dir;
  std::string out_dir;
  std::size_t min_count = 1;
  bool lowercase = false;
  std::string direction = "forward";
  std::uint64_t seed = 1;
};

int cmd_prepare(const PrepareArgs& args) {
  const fs::path snli(args.snli_dir);
  const fs::path out(args.out_dir);
  const std::map<entail::Split, std::string> files = {
      {entail::Split::train, "snli_1.0_train.jsonl"},
      {entail::Split::dev, "snli_1.0_dev.jsonl"},
      {entail::Split::test, "snli_1.0_test.jsonl"}};

  std::string missing;
  for (const auto& [split, name] : files) {
    if (!fs::exists(snli / name)) missing += (missing.empty() ? "" : ", ") + name;
  }
  if (!missing.empty()) {
    throw entail::IoError("SNLI files not found in " + snli.string() + "; expected: " + missing);
  }

  fs::create_directories(out);
  Manifest manifest("prepare", out);
  manifest.input("snli_dir", snli.string());
  manifest.config({{"min_count", args.min_count},
                   {"lowercase", args.lowercase},
                   {"direction", args.direction},
                   {"seed", args.seed}});

  const entail::TokenizerOptions tok = tokenizer_options(args.lowercase);
  std::map<entail::Split, entail::Dataset> datasets;
  json skip_report = json::object();
  for (const auto& [split, name] : files) {
    entail::SnliFile file = entail::read_snli_jsonl(snli / name);
    auto kept = entail::filter_entailment(file.records);
    std::size_t skipped_empty = 0;
    entail::Dataset ds = entail::tokenize_pairs(kept, split, tok, &skipped_empty);
    if (args.direction == "inverse") ds = entail::swap_direction(std::move(ds));
    skip_report[entail::split_name(split)] = {{"unlabeled", file.skipped_unlabeled},
                                              {"empty_sentence", skipped_empty},
                                              {"entailment", kept.size()}};
    datasets.emplace(split, std::move(ds));
  }

  entail::Vocabulary vocab =
      entail::build_vocabulary(datasets.at(entail::Split::train), args.min_count);

  entail::DatasetStats stats;
  stats.train_pairs = datasets.at(entail::Split::train).size();
  stats.dev_pairs = datasets.at(entail::Split::dev).size();
  stats.test_pairs = datasets.at(entail::Split::test).size();
  stats.vocab_size = vocab.size();
  std::size_t total = 0, unknown = 0;
  for (const auto& [split, ds] : datasets) {
    for (const entail::SentencePair& p : ds) {
      for (const auto* side : {&p.source, &p.target}) {
        for (const std::string& t : *side) {
          ++total;
          if (!vocab.contains(t)) ++unknown;
        }
      }
    }
  }
  stats.oov_fraction = total == 0 ? 0.0 : double(unknown) / double(total);

  for (const auto& [split, ds] : datasets) {
    const std::string name = std::string(entail::split_name(split)) + ".jsonl";
    entail::save_dataset(ds, out / name);
    manifest.output(entail::split_name(split), (out / name).string());
  }
  vocab.save(out / "vocab.txt");
  manifest.output("vocab", (out / "vocab.txt").string());

  json stats_json = stats.to_json();
  stats_json["skipped"] = skip_report;
  std::ofstream(out / "stats.json") << stats_json.dump(2) << '\n';
  manifest.output("stats", (out / "stats.json").string());
  manifest.write();

  std::cout << stats_json.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data_dir;
  std::string out_dir;
  std::string embeddings = "random";
  std::size_t embedding_dim = 300;
  std::size_t hidden = 256;
  bool attention = true;
  bool input_feeding = false;
  bool untied_embeddings = false;
  bool freeze_pretrained = false;
  std::size_t max_decode_len = 50;
  entail::TrainingConfig training;
  std::string direction = "forward";
  bool resume = false;
};

int cmd_train(TrainArgs args) {
  const fs::path data(args.data_dir);
  const fs::path out(args.out_dir);
  fs::create_directories(out);

  entail::Dataset train_ds = entail::load_dataset(data / "train.jsonl", entail::Split::train);
  entail::Dataset dev_ds = entail::load_dataset(data / "dev.jsonl", entail::Split::dev);
  entail::Vocabulary vocab = entail::Vocabulary::load(data / "vocab.txt");

  Manifest manifest("train", out);
  manifest.input("data_dir", data.string());
  manifest.input("embeddings", args.embeddings);

  args.training.direction =
      args.direction == "inverse" ? entail::Direction::inverse : entail::Direction::forward;
  args.training.checkpoint_dir = out;

  std::optional<entail::EmbeddingMatrix> emb;
  if (args.embeddings == "random") {
    emb = entail::init_embedding_matrix(vocab, nullptr, args.embedding_dim, args.training.seed);
  } else {
    entail::WordVectors vectors = entail::load_word_vectors(args.embeddings);
    emb = entail::init_embedding_matrix(vocab, &vectors, 0, args.training.seed);
    std::cerr << "embeddings: " << vectors.dim << "-dim vectors, OOV fraction "
              << emb->oov_fraction << '\n';
  }

  entail::ModelConfig model;
  model.hidden = args.hidden;
  model.embed_dim = emb->weights.cols();
  model.vocab_size = vocab.size();
  model.attention = args.attention;
  model.input_feeding = args.input_feeding;
  model.tied_embeddings = !args.untied_embeddings;
  model.max_decode_len = args.max_decode_len;

  manifest.config({{"model", model.to_json()},
                   {"training", args.training.to_json()},
                   {"embedding_dim", emb->weights.cols()},
                   {"embedding_oov_fraction", emb->oov_fraction}});

  entail::Seq2SeqParams params = entail::Seq2SeqParams::init(model, *emb, args.training.seed);

  entail::TrainingLog log;
  if (args.resume) {
    log = entail::Trainer::resume(out / "last.bin", out / "last.opt.bin", train_ds, dev_ds,
                                  vocab, params, args.training, &std::cerr,
                                  args.freeze_pretrained ? &emb->pretrained : nullptr);
  } else {
    entail::Trainer trainer(train_ds, dev_ds, vocab, params, args.training,
                            args.freeze_pretrained ? &emb->pretrained : nullptr);
    log = trainer.run(&std::cerr);
  }

  vocab.save(out / "vocab.txt");  // checkpoints travel with their vocabulary
  manifest.output("checkpoint_dir", out.string());
  manifest.output("best_checkpoint", log.best_checkpoint);
  manifest.output("train_log", (out / "train_log.jsonl").string());
  manifest.note("result", {{"best_dev_bleu", log.best_dev_bleu},
                           {"steps", log.steps.size()},
                           {"aborted", log.aborted}});
  manifest.write();

  json result{{"best_checkpoint", log.best_checkpoint}, {"best_dev_bleu", log.best_dev_bleu}};
  if (!log.aborted.empty()) result["aborted"] = log.aborted;
  std::cout << result.dump(2) << '\n';
  return log.aborted.empty() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string checkpoint;
  std::string vocab;
  std::string input;   // empty = stdin
  std::string output;  // empty = stdout
  std::string out_dir = ".";
  bool lowercase = false;
  std::size_t threads = 1;
  std::uint64_t seed = 1;
};

int cmd_generate(const GenerateArgs& args) {
  entail::Vocabulary vocab = entail::Vocabulary::load(args.vocab);
  entail::Seq2SeqParams params = entail::load_checkpoint(args.checkpoint, vocab);

  std::vector<std::string> lines;
  if (args.input.empty()) {
    lines = read_lines(std::cin);
  } else {
    std::ifstream in(args.input);
    if (!in) throw entail::IoError("cannot open input file " + args.input);
    lines = read_lines(in);
  }

  const entail::TokenizerOptions tok = tokenizer_options(args.lowercase);
  std::vector<std::string> outputs(lines.size());
  entail::parallel_for(lines.size(), args.threads, [&](std::size_t i) {
    if (blank(lines[i])) return;  // blank in, blank out
    outputs[i] =
        entail::join_tokens(entail::greedy_decode(entail::tokenize(lines[i], tok), params, vocab));
  });

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!args.output.empty()) {
    file.open(args.output);
    if (!file) throw entail::IoError("cannot write output file " + args.output);
    out = &file;
  }
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (blank(lines[i]) && !lines[i].empty()) {
      std::cerr << "warning: blank input line " << (i + 1) << '\n';
    }
    *out << outputs[i] << '\n';
  }

  Manifest manifest("generate", args.out_dir);
  manifest.input("checkpoint", args.checkpoint);
  manifest.input("vocab", args.vocab);
  manifest.input("input", args.input.empty() ? "<stdin>" : args.input);
  manifest.output("output", args.output.empty() ? "<stdout>" : args.output);
  manifest.config({{"threads", args.threads}, {"lowercase", args.lowercase},
                   {"seed", args.seed}});
  manifest.note("result", {{"lines", lines.size()}});
  manifest.write();
  return 0;
}

// ---------------------------------------------------------------------------
// chain
// ---------------------------------------------------------------------------

struct ChainArgs {
  std::string checkpoint;
  std::string vocab;
  std::string seeds_file;
  std::string graph_prefix;  // empty = chains only
  std::string out_dir = ".";
  std::size_t max_len = 10;
  bool lowercase = false;
  std::size_t threads = 1;
};

int cmd_chain(const ChainArgs& args) {
  entail::Vocabulary vocab = entail::Vocabulary::load(args.vocab);
  entail::Seq2SeqParams params = entail::load_checkpoint(args.checkpoint, vocab);

  std::ifstream in(args.seeds_file);
  if (!in) throw entail::IoError("cannot open seeds file " + args.seeds_file);
  const entail::TokenizerOptions tok = tokenizer_options(args.lowercase);
  std::vector<entail::Sentence> seeds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) {
      std::cerr << "warning: skipping blank seed line " << line_no << '\n';
      continue;
    }
    seeds.push_back(entail::tokenize(line, tok));
  }

  // The model is deterministic, so one sentence always maps to the same
  // output; memoizing makes shared chain suffixes free.
  std::map<std::string, entail::Sentence> cache;
  entail::SentenceGenerator generator = [&](const entail::Sentence& s) {
    const std::string key = entail::canonical_sentence(s);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    entail::Sentence out = entail::greedy_decode(s, params, vocab);
    cache.emplace(key, out);
    return out;
  };

  Manifest manifest("chain", args.out_dir);
  manifest.input("checkpoint", args.checkpoint);
  manifest.input("seeds", args.seeds_file);
  manifest.config({{"max_len", args.max_len},
                   {"graph", args.graph_prefix},
                   {"threads", args.threads},
                   {"lowercase", args.lowercase}});

  if (seeds.empty()) {
    std::cerr << "warning: no usable seed sentences\n";
    manifest.write();
    return 0;
  }

  if (args.graph_prefix.empty()) {
    // Chains from distinct seeds are independent; without the shared memo
    // they can run in parallel, printed in seed order.
    std::vector<std::string> rendered(seeds.size());
    entail::parallel_for(seeds.size(), args.threads, [&](std::size_t i) {
      entail::SentenceGenerator decode = [&](const entail::Sentence& s) {
        return entail::greedy_decode(s, params, vocab);
      };
      try {
        rendered[i] = entail::format_chain(
            entail::generate_chain(seeds[i], args.threads > 1 ? decode : generator,
                                   args.max_len));
      } catch (const entail::GeneratorError& e) {
        rendered[i] = "";
        std::cerr << "chain from '" << entail::canonical_sentence(seeds[i])
                  << "' failed: " << e.what() << '\n';
      }
    });
    for (const std::string& line : rendered) {
      if (!line.empty()) std::cout << line << '\n';
    }
    manifest.write();
    return 0;
  }

  entail::EntailmentGraph graph =
      entail::build_graph(seeds, generator, args.max_len, &std::cerr);
  for (std::size_t i = 0; i < graph.chains.size(); ++i) {
    for (std::size_t j = 0; j < graph.chains[i].size(); ++j) {
      if (j) std::cout << " -> ";
      std::cout << graph.chains[i][j];
    }
    std::cout << " [stop: " << entail::stop_reason_name(graph.chain_stops[i]) << "]\n";
  }

  const fs::path prefix(args.graph_prefix);
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
  {
    std::ofstream dot(prefix.string() + ".dot");
    entail::export_graph_dot(graph, dot);
    std::ofstream jsonl(prefix.string() + ".jsonl");
    entail::export_graph_jsonl(graph, jsonl);
    std::ofstream stats(prefix.string() + ".stats.json");
    stats << entail::graph_stats(graph).to_json().dump(2) << '\n';
  }
  manifest.output("dot", prefix.string() + ".dot");
  manifest.output("jsonl", prefix.string() + ".jsonl");
  manifest.output("stats", prefix.string() + ".stats.json");
  manifest.write();
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string vocab;
  std::string data_dir;
  std::string split = "test";
  std::string tally_file;
  std::string annotate_out = "annotation_sample.jsonl";
  std::string out_dir = ".";
  std::size_t annotate = 0;
  std::uint64_t seed = 1;
  bool self_test = false;
  std::size_t threads = 1;
};

int cmd_eval(const EvalArgs& args) {
  if (!args.tally_file.empty()) {
    entail::TallyResult tally = entail::tally_annotations(args.tally_file);
    std::cout << tally.to_json().dump(2) << '\n';
    return 0;
  }
  if (args.checkpoint.empty() && !args.self_test) {
    throw entail::ConfigError("eval: --checkpoint required unless --tally or --self-test");
  }
  if (args.data_dir.empty()) throw entail::ConfigError("eval: --data required");

  const fs::path data(args.data_dir);
  entail::Dataset pairs = entail::load_dataset(data / (args.split + ".jsonl"));
  if (pairs.empty()) throw entail::ConfigError("eval: split " + args.split + " is empty");

  Manifest manifest("eval", args.out_dir);
  manifest.input("data_dir", data.string());
  manifest.config({{"split", args.split},
                   {"self_test", args.self_test},
                   {"annotate", args.annotate},
                   {"seed", args.seed},
                   {"threads", args.threads}});

  std::vector<std::vector<std::string>> candidates(pairs.size());
  std::vector<std::vector<std::string>> references(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) references[i] = pairs[i].target;

  if (args.self_test) {
    candidates = references;
  } else {
    manifest.input("checkpoint", args.checkpoint);
    entail::Vocabulary vocab = entail::Vocabulary::load(args.vocab);
    entail::Seq2SeqParams params = entail::load_checkpoint(args.checkpoint, vocab);
    entail::parallel_for(pairs.size(), args.threads, [&](std::size_t i) {
      candidates[i] = entail::greedy_decode(pairs[i].source, params, vocab);
    });
  }

  entail::BleuReport report = entail::corpus_bleu(candidates, references);
  json report_json = report.to_json();
  // mean generated length; the interesting number when comparing a forward
  // against an inverse model
  report_json["sentences"] = pairs.size();
  report_json["mean_candidate_tokens"] = double(report.candidate_length) / double(pairs.size());
  std::cout << report_json.dump(2) << '\n';
  manifest.note("result", report_json);

  if (args.annotate > 0) {
    fs::create_directories(args.out_dir);
    const fs::path out = fs::path(args.out_dir) / args.annotate_out;
    entail::export_annotation_sample(pairs, candidates, args.annotate, args.seed, out);
    manifest.output("annotation_sample", out.string());
    std::cerr << "annotation sample written to " << out.string() << '\n';
  }
  manifest.write();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"entailment generation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", entail::kToolVersion);
  app.set_config("--config");

  PrepareArgs prepare;
  CLI::App* prep = app.add_subcommand("prepare", "filter SNLI into entailment datasets");
  prep->add_option("--snli", prepare.snli_dir, "directory with snli_1.0_*.jsonl")->required();
  prep->add_option("--out", prepare.out_dir, "output directory")->required();
  prep->add_option("--min-count", prepare.min_count, "vocabulary frequency threshold");
  prep->add_flag("--lowercase", prepare.lowercase, "lowercase all tokens");
  prep->add_option("--direction", prepare.direction, "forward|inverse")
      ->check(CLI::IsMember({"forward", "inverse"}));
  prep->add_option("--seed", prepare.seed, "run seed (recorded in the manifest)");

  TrainArgs train;
  CLI::App* tr = app.add_subcommand("train", "train the sequence-to-sequence model");
  tr->add_option("--data", train.data_dir, "prepared dataset directory")->required();
  tr->add_option("--out", train.out_dir, "checkpoint directory")->required();
  tr->add_option("--embeddings", train.embeddings, "word vector file or 'random'");
  tr->add_option("--embedding-dim", train.embedding_dim, "dimension for random embeddings");
  tr->add_option("--hidden", train.hidden, "LSTM hidden size");
  tr->add_flag("--attention,!--no-attention", train.attention, "word-by-word attention");
  tr->add_flag("--input-feeding", train.input_feeding, "feed attention context into decoder");
  tr->add_flag("--untied-embeddings", train.untied_embeddings,
               "separate source/target embeddings");
  tr->add_flag("--freeze-pretrained", train.freeze_pretrained,
               "do not update pretrained embedding rows");
  tr->add_option("--max-decode-len", train.max_decode_len, "decoding length cap");
  tr->add_option("--epochs", train.training.epochs, "training epochs");
  tr->add_option("--batch-size", train.training.batch_size, "mini-batch size");
  tr->add_option("--lr", train.training.lr, "learning rate");
  tr->add_option("--clip-norm", train.training.clip_norm, "global gradient norm cap");
  tr->add_option("--beta1", train.training.beta1, "first momentum coefficient");
  tr->add_option("--beta2", train.training.beta2, "second momentum coefficient");
  tr->add_option("--eps", train.training.eps, "optimizer epsilon");
  tr->add_option("--seed", train.training.seed, "run seed");
  tr->add_option("--eval-every", train.training.eval_every,
                 "extra dev evals every N steps (0 = per epoch)");
  tr->add_option("--dev-sample", train.training.dev_sample,
                 "dev subsample size for in-training BLEU");
  tr->add_option("--threads", train.training.threads, "decode threads for dev evals");
  tr->add_flag("--deterministic", train.training.deterministic,
               "single-threaded, bit-reproducible runs");
  tr->add_option("--direction", train.direction, "forward|inverse")
      ->check(CLI::IsMember({"forward", "inverse"}));
  tr->add_flag("--resume", train.resume, "continue from last.bin/last.opt.bin in --out");

  GenerateArgs generate;
  CLI::App* gen = app.add_subcommand("generate", "greedy-decode one sentence per input line");
  gen->add_option("--checkpoint", generate.checkpoint, "model checkpoint")->required();
  gen->add_option("--vocab", generate.vocab, "vocabulary file")->required();
  gen->add_option("--input", generate.input, "input file (default stdin)");
  gen->add_option("--output", generate.output, "output file (default stdout)");
  gen->add_option("--out-dir", generate.out_dir, "directory for the run manifest");
  gen->add_flag("--lowercase", generate.lowercase, "lowercase inputs before decoding");
  gen->add_option("--threads", generate.threads, "decode threads");
  gen->add_option("--seed", generate.seed, "run seed (recorded in the manifest)");

  ChainArgs chain;
  CLI::App* ch = app.add_subcommand("chain", "build inference chains by recursive generation");
  ch->add_option("--checkpoint", chain.checkpoint, "model checkpoint")->required();
  ch->add_option("--vocab", chain.vocab, "vocabulary file")->required();
  ch->add_option("--seeds", chain.seeds_file, "seed sentences, one per line")->required();
  ch->add_option("--max-len", chain.max_len, "maximum sentences per chain");
  ch->add_option("--graph", chain.graph_prefix,
                 "also write <prefix>.dot, <prefix>.jsonl, <prefix>.stats.json");
  ch->add_option("--out-dir", chain.out_dir, "directory for the run manifest");
  ch->add_flag("--lowercase", chain.lowercase, "lowercase seeds before decoding");
  ch->add_option("--threads", chain.threads, "decode threads");

  EvalArgs eval;
  CLI::App* ev = app.add_subcommand("eval", "corpus BLEU and annotation workflows");
  ev->add_option("--checkpoint", eval.checkpoint, "model checkpoint");
  ev->add_option("--vocab", eval.vocab, "vocabulary file");
  ev->add_option("--data", eval.data_dir, "prepared dataset directory");
  ev->add_option("--split", eval.split, "train|dev|test")
      ->check(CLI::IsMember({"train", "dev", "test"}));
  ev->add_option("--annotate", eval.annotate, "export N sampled items for manual annotation");
  ev->add_option("--annotate-out", eval.annotate_out, "annotation sample filename");
  ev->add_option("--tally", eval.tally_file, "tally a filled annotation file and exit");
  ev->add_option("--out-dir", eval.out_dir, "directory for manifest and annotation sample");
  ev->add_flag("--self-test", eval.self_test, "score gold targets against themselves");
  ev->add_option("--seed", eval.seed, "sampling seed");
  ev->add_option("--threads", eval.threads, "decode threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (prep->parsed()) return cmd_prepare(prepare);
    if (tr->parsed()) return cmd_train(std::move(train));
    if (gen->parsed()) return cmd_generate(generate);
    if (ch->parsed()) return cmd_chain(chain);
    if (ev->parsed()) return cmd_eval(eval);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
