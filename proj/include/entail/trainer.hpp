#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "entail/bleu.hpp"
#include "entail/corpus.hpp"
#include "entail/optimizer.hpp"
#include "entail/parallel.hpp"
#include "entail/seq2seq.hpp"

namespace entail {

enum class Direction { forward, inverse };

inline const char* direction_name(Direction d) {
  return d == Direction::forward ? "forward" : "inverse";
}

struct TrainingConfig {
  std::size_t epochs = 25;
  std::size_t batch_size = 64;
  scalar clip_norm = scalar(5.0);
  scalar lr = scalar(0.001);
  scalar beta1 = scalar(0.9);
  scalar beta2 = scalar(0.999);
  scalar eps = scalar(1e-8);
  std::uint64_t seed = 1;
  Direction direction = Direction::forward;
  std::size_t eval_every = 0;    // extra dev evals every N steps; 0 = per epoch only
  std::size_t dev_sample = 500;  // dev subsample size for in-training BLEU
  std::size_t threads = 1;       // dev decoding parallelism
  bool deterministic = false;    // force single-threaded decoding
  bool freeze_pretrained = false;
  std::filesystem::path checkpoint_dir;

  void validate() const {
    if (epochs < 1) throw ConfigError("training: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("training: batch size must be >= 1");
    if (!(clip_norm > 0)) throw ConfigError("training: clip norm must be positive");
    if (!(lr > 0)) throw ConfigError("training: learning rate must be positive");
    if (dev_sample < 1) throw ConfigError("training: dev sample must be >= 1");
    if (checkpoint_dir.empty()) throw ConfigError("training: checkpoint dir required");
  }

  AdamConfig adam() const { return AdamConfig{lr, beta1, beta2, eps}; }

  nlohmann::json to_json() const {
    return {{"epochs", epochs},
            {"batch_size", batch_size},
            {"clip_norm", double(clip_norm)},
            {"lr", double(lr)},
            {"beta1", double(beta1)},
            {"beta2", double(beta2)},
            {"eps", double(eps)},
            {"seed", seed},
            {"direction", direction_name(direction)},
            {"eval_every", eval_every},
            {"dev_sample", dev_sample},
            {"threads", threads},
            {"deterministic", deterministic},
            {"freeze_pretrained", freeze_pretrained}};
  }
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

struct EvalRecord {
  std::size_t step = 0;
  double dev_bleu = 0.0;
  std::string checkpoint;
};

struct TrainingLog {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
  std::vector<double> epoch_seconds;
  std::string best_checkpoint;
  double best_dev_bleu = 0.0;
  std::string aborted;  // non-empty if training stopped on a numeric error
};

namespace detail {

class TrainLogWriter {
 public:
  explicit TrainLogWriter(const std::filesystem::path& path, bool append)
      : out_(path, append ? std::ios::app : std::ios::trunc) {
    if (!out_) throw IoError("cannot write training log " + path.string());
  }

  void record(const nlohmann::json& j) { out_ << j.dump() << '\n' << std::flush; }

 private:
  std::ofstream out_;
};

}  // namespace detail

// Greedy-decodes every source in `pairs` and scores against the targets.
inline double dev_bleu(const Dataset& pairs, Seq2SeqParams& params, const Vocabulary& vocab,
                       std::size_t threads) {
  if (pairs.empty()) throw ConfigError("dev_bleu: empty dev set");
  std::vector<std::vector<std::string>> candidates(pairs.size());
  std::vector<std::vector<std::string>> references(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t i) {
    candidates[i] = greedy_decode(pairs[i].source, params, vocab);
    references[i] = pairs[i].target;
  });
  return corpus_bleu(candidates, references).bleu;
}

// Training driver. One epoch is a full shuffled pass; the shuffle for epoch e
// is drawn from derive_seed(seed, "epoch-<e>") so a resumed run replays the
// identical batch order. Checkpoints and the JSONL log land in
// config.checkpoint_dir.
class Trainer {
 public:
  Trainer(Dataset train, Dataset dev, const Vocabulary& vocab, Seq2SeqParams& params,
          const TrainingConfig& config,
          const std::vector<std::uint8_t>* pretrained_rows = nullptr)
      : train_(std::move(train)), dev_(std::move(dev)), vocab_(vocab), params_(params),
        config_(config), adam_(params.parameters(), config.adam()) {
    config_.validate();
    if (train_.empty()) throw ConfigError("training: empty train set");
    if (dev_.empty()) throw ConfigError("training: empty dev set");
    if (config_.direction == Direction::inverse) {
      train_ = swap_direction(std::move(train_));
      dev_ = swap_direction(std::move(dev_));
    }
    if (config_.freeze_pretrained && pretrained_rows != nullptr) {
      frozen_rows_ = *pretrained_rows;
    }
    std::filesystem::create_directories(config_.checkpoint_dir);

    // Fixed dev subsample for in-training evals, drawn once from the seed.
    std::vector<std::size_t> order(dev_.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    Rng rng(derive_seed(config_.seed, "dev-sample"));
    rng.shuffle(order);
    order.resize(std::min(config_.dev_sample, dev_.size()));
    std::sort(order.begin(), order.end());
    for (std::size_t i : order) dev_subsample_.push_back(dev_[i]);
  }

  TrainingLog run(std::ostream* progress = nullptr) {
    detail::TrainLogWriter log_file(config_.checkpoint_dir / "train_log.jsonl",
                                    resume_from_epoch_ > 0 || resume_from_batch_ > 0);
    TrainingLog log;
    bool aborted = false;

    for (std::size_t epoch = resume_from_epoch_; epoch < config_.epochs && !aborted; ++epoch) {
      const auto epoch_start = std::chrono::steady_clock::now();
      auto batches = make_batches(train_, vocab_, config_.batch_size,
                                  derive_seed(config_.seed, "epoch-" + std::to_string(epoch)));
      std::size_t first_batch = (epoch == resume_from_epoch_) ? resume_from_batch_ : 0;
      for (std::size_t b = first_batch; b < batches.size(); ++b) {
        StepRecord rec;
        try {
          rec = train_step(batches[b], epoch);
        } catch (const NumericError& e) {
          log.aborted = e.what();
          aborted = true;
          log_file.record({{"type", "abort"}, {"step", step_}, {"error", log.aborted}});
          if (progress != nullptr) {
            *progress << "aborted at step " << step_ << ": " << log.aborted << '\n';
          }
          break;
        }
        log.steps.push_back(rec);
        log_file.record({{"type", "step"},
                         {"step", rec.step},
                         {"epoch", rec.epoch},
                         {"loss", rec.loss},
                         {"grad_norm", rec.grad_norm}});
        if (config_.eval_every > 0 && step_ % config_.eval_every == 0 &&
            b + 1 < batches.size()) {
          evaluate(log, log_file, epoch, b + 1, progress);
        }
      }
      if (aborted) break;
      const double seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
      log.epoch_seconds.push_back(seconds);
      log_file.record({{"type", "epoch"}, {"epoch", epoch}, {"seconds", seconds}});
      evaluate(log, log_file, epoch + 1, 0, progress);
      if (progress != nullptr) {
        *progress << "epoch " << (epoch + 1) << "/" << config_.epochs << " done in " << seconds
                  << "s, dev BLEU " << log.evals.back().dev_bleu << '\n';
      }
    }

    select_best(log, log_file, progress);
    return log;
  }

  // Restores optimizer moments and the training position saved alongside the
  // last checkpoint, then continues as if never interrupted.
  static TrainingLog resume(const std::filesystem::path& checkpoint,
                            const std::filesystem::path& optimizer_state, Dataset train,
                            Dataset dev, const Vocabulary& vocab, Seq2SeqParams& params,
                            const TrainingConfig& config, std::ostream* progress = nullptr,
                            const std::vector<std::uint8_t>* pretrained_rows = nullptr) {
    Trainer t(std::move(train), std::move(dev), vocab, params, config, pretrained_rows);
    params = load_checkpoint(checkpoint, vocab);
    nlohmann::json meta;
    t.adam_ = Adam::load(optimizer_state, params.parameters(), vocab_hash(vocab), &meta);
    if (meta.is_null() || !meta.contains("epoch")) {
      throw CheckpointVersionError(optimizer_state.string() + ": missing trainer position");
    }
    t.resume_from_epoch_ = meta.at("epoch").get<std::size_t>();
    t.resume_from_batch_ = meta.at("batch").get<std::size_t>();
    t.step_ = meta.at("step").get<std::size_t>();
    for (const auto& e : meta.value("evals", nlohmann::json::array())) {
      t.evals_so_far_.push_back(EvalRecord{e.at("step").get<std::size_t>(),
                                           e.at("dev_bleu").get<double>(),
                                           e.at("checkpoint").get<std::string>()});
    }
    return t.run(progress);
  }

 private:
  StepRecord train_step(const Batch& batch, std::size_t epoch) {
    Graph g;
    Var loss = teacher_forced_loss(g, batch, params_);
    const double loss_value = double(g.value(loss).v[0]);
    g.backward(loss);
    if (!frozen_rows_.empty()) zero_frozen_rows();
    const scalar norm = clip_global_norm(params_.parameters(), config_.clip_norm);
    adam_.step();
    ++step_;
    return StepRecord{step_, epoch, loss_value, double(norm)};
  }

  void zero_frozen_rows() {
    auto zero_rows = [this](Parameter& p) {
      const std::size_t d = p.value.cols();
      for (std::size_t r = 0; r < frozen_rows_.size() && r < p.value.rows(); ++r) {
        if (frozen_rows_[r]) {
          std::fill_n(p.grad.v.begin() + long(r * d), d, scalar(0));
        }
      }
    };
    zero_rows(params_.embedding);
    if (params_.target_embedding) zero_rows(*params_.target_embedding);
  }

  void evaluate(TrainingLog& log, detail::TrainLogWriter& log_file, std::size_t next_epoch,
                std::size_t next_batch, std::ostream* progress) {
    const std::size_t threads = config_.deterministic ? 1 : std::max<std::size_t>(1, config_.threads);
    const double bleu = dev_bleu(dev_subsample_, params_, vocab_, threads);
    const std::string name = "ckpt_step" + std::to_string(step_) + ".bin";
    save_checkpoint(params_, vocab_, config_.checkpoint_dir / name);
    EvalRecord rec{step_, bleu, name};
    log.evals.push_back(rec);
    evals_so_far_.push_back(rec);
    log_file.record(
        {{"type", "eval"}, {"step", step_}, {"dev_bleu", bleu}, {"checkpoint", name}});

    nlohmann::json evals = nlohmann::json::array();
    for (const EvalRecord& e : evals_so_far_) {
      evals.push_back(
          {{"step", e.step}, {"dev_bleu", e.dev_bleu}, {"checkpoint", e.checkpoint}});
    }
    save_checkpoint(params_, vocab_, config_.checkpoint_dir / "last.bin");
    adam_.save(config_.checkpoint_dir / "last.opt.bin", vocab_hash(vocab_),
               {{"epoch", next_epoch}, {"batch", next_batch}, {"step", step_}, {"evals", evals}});
    if (progress != nullptr && next_batch != 0) {
      *progress << "step " << step_ << " dev BLEU " << bleu << '\n';
    }
  }

  // Highest subsample BLEU wins, ties to the earlier checkpoint; the top 3
  // candidates are re-scored on the full dev set unless the subsample
  // already covers it.
  void select_best(TrainingLog& log, detail::TrainLogWriter& log_file, std::ostream* progress) {
    if (evals_so_far_.empty()) return;
    std::vector<EvalRecord> ranked = evals_so_far_;
    std::stable_sort(ranked.begin(), ranked.end(), [](const EvalRecord& a, const EvalRecord& b) {
      if (a.dev_bleu != b.dev_bleu) return a.dev_bleu > b.dev_bleu;
      return a.step < b.step;
    });

    EvalRecord best = ranked.front();
    if (dev_subsample_.size() < dev_.size()) {
      ranked.resize(std::min<std::size_t>(3, ranked.size()));
      const std::size_t threads =
          config_.deterministic ? 1 : std::max<std::size_t>(1, config_.threads);
      double best_full = -1.0;
      for (const EvalRecord& cand : ranked) {
        Seq2SeqParams cand_params =
            load_checkpoint(config_.checkpoint_dir / cand.checkpoint, vocab_);
        const double full = dev_bleu(dev_, cand_params, vocab_, threads);
        if (full > best_full || (full == best_full && cand.step < best.step)) {
          best_full = full;
          best = cand;
          best.dev_bleu = full;
        }
        if (progress != nullptr) {
          *progress << "full-dev re-eval " << cand.checkpoint << ": " << full << '\n';
        }
      }
    }

    std::filesystem::copy_file(config_.checkpoint_dir / best.checkpoint,
                               config_.checkpoint_dir / "best.bin",
                               std::filesystem::copy_options::overwrite_existing);
    log.best_checkpoint = (config_.checkpoint_dir / "best.bin").string();
    log.best_dev_bleu = best.dev_bleu;
    log_file.record({{"type", "best"},
                     {"checkpoint", best.checkpoint},
                     {"dev_bleu", best.dev_bleu}});
  }

  Dataset train_, dev_;
  Dataset dev_subsample_;
  const Vocabulary& vocab_;
  Seq2SeqParams& params_;
  TrainingConfig config_;
  Adam adam_;
  std::vector<std::uint8_t> frozen_rows_;
  std::size_t step_ = 0;
  std::size_t resume_from_epoch_ = 0;
  std::size_t resume_from_batch_ = 0;
  std::vector<EvalRecord> evals_so_far_;
};

inline TrainingLog train(Dataset train_ds, Dataset dev_ds, const Vocabulary& vocab,
                         Seq2SeqParams& params, const TrainingConfig& config,
                         const std::vector<std::uint8_t>* pretrained_rows = nullptr,
                         std::ostream* progress = nullptr) {
  Trainer t(std::move(train_ds), std::move(dev_ds), vocab, params, config, pretrained_rows);
  return t.run(progress);
}

}  // namespace entail
