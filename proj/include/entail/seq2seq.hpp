#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "entail/autodiff.hpp"
#include "entail/checkpoint.hpp"
#include "entail/corpus.hpp"
#include "entail/embeddings.hpp"
#include "entail/nn.hpp"
#include "entail/vocab.hpp"

namespace entail {

struct ModelConfig {
  std::size_t hidden = 256;
  std::size_t embed_dim = 300;
  std::size_t vocab_size = 0;
  bool attention = true;
  // Feed the previous attention context into the decoder input (off: the
  // decoder sees only the embedded previous token).
  bool input_feeding = false;
  bool tied_embeddings = true;
  std::size_t max_decode_len = 50;

  void validate() const {
    if (hidden < 1) throw ConfigError("model: hidden size must be >= 1");
    if (embed_dim < 1) throw ConfigError("model: embedding dim must be >= 1");
    if (max_decode_len < 1) throw ConfigError("model: max decode length must be >= 1");
    if (vocab_size <= Vocabulary::kSpecialCount) {
      throw ConfigError("model: vocabulary must contain corpus tokens");
    }
    if (input_feeding && !attention) {
      throw ConfigError("model: input feeding requires attention");
    }
  }

  std::size_t decoder_input_dim() const { return embed_dim + (input_feeding ? hidden : 0); }
  std::size_t output_input_dim() const { return hidden + (attention ? hidden : 0); }

  nlohmann::json to_json() const {
    return {{"hidden", hidden},
            {"embed_dim", embed_dim},
            {"vocab_size", vocab_size},
            {"attention", attention},
            {"input_feeding", input_feeding},
            {"tied_embeddings", tied_embeddings},
            {"max_decode_len", max_decode_len}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.hidden = j.at("hidden").get<std::size_t>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.attention = j.at("attention").get<bool>();
    c.input_feeding = j.at("input_feeding").get<bool>();
    c.tied_embeddings = j.at("tied_embeddings").get<bool>();
    c.max_decode_len = j.at("max_decode_len").get<std::size_t>();
    return c;
  }
};

// All named model parameters. Weights start uniform in [-0.1, 0.1] from the
// run seed; the forget-gate bias starts at 1; the embedding rows come from
// the embeddings module.
class Seq2SeqParams {
 public:
  ModelConfig config;
  Parameter embedding;
  std::optional<Parameter> target_embedding;  // present when untied
  LstmWeights encoder, decoder;
  std::optional<AttentionWeights> attention;
  Parameter out_w, out_b;

  static Seq2SeqParams skeleton(const ModelConfig& config) {
    config.validate();
    Seq2SeqParams p;
    p.config = config;
    p.embedding = Parameter("embedding", Tensor::zeros({config.vocab_size, config.embed_dim}));
    if (!config.tied_embeddings) {
      p.target_embedding =
          Parameter("target_embedding", Tensor::zeros({config.vocab_size, config.embed_dim}));
    }
    p.encoder = LstmWeights("encoder", config.hidden, config.embed_dim);
    p.decoder = LstmWeights("decoder", config.hidden, config.decoder_input_dim());
    if (config.attention) {
      p.attention = AttentionWeights("attention", config.hidden, config.hidden, config.hidden);
    }
    p.out_w = Parameter("output.w", Tensor::zeros({config.vocab_size, config.output_input_dim()}));
    p.out_b = Parameter("output.b", Tensor::zeros({config.vocab_size}));
    return p;
  }

  static Seq2SeqParams init(ModelConfig config, const EmbeddingMatrix& emb, std::uint64_t seed) {
    config.vocab_size = emb.weights.rows();
    config.embed_dim = emb.weights.cols();
    Seq2SeqParams p = skeleton(config);
    p.embedding.value = emb.weights;
    if (p.target_embedding) p.target_embedding->value = emb.weights;

    Rng rng(derive_seed(seed, "model-init"));
    auto fill = [&rng](Tensor& t) {
      for (scalar& x : t.v) x = scalar(rng.uniform(-0.1, 0.1));
    };
    fill(p.encoder.w.value);
    fill(p.encoder.u.value);
    fill(p.decoder.w.value);
    fill(p.decoder.u.value);
    if (p.attention) {
      fill(p.attention->wk.value);
      fill(p.attention->wq.value);
      fill(p.attention->v.value);
    }
    fill(p.out_w.value);
    p.encoder.set_forget_bias(1);
    p.decoder.set_forget_bias(1);
    return p;
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> ps = {&embedding};
    if (target_embedding) ps.push_back(&*target_embedding);
    for (LstmWeights* w : {&encoder, &decoder}) {
      ps.push_back(&w->w);
      ps.push_back(&w->u);
      ps.push_back(&w->b);
    }
    if (attention) {
      ps.push_back(&attention->wk);
      ps.push_back(&attention->wq);
      ps.push_back(&attention->v);
    }
    ps.push_back(&out_w);
    ps.push_back(&out_b);
    return ps;
  }

  void zero_grads() {
    for (Parameter* p : parameters()) p->zero_grad();
  }
};

struct EncoderOutput {
  std::vector<Var> states;  // one [B x h] per source position
  LstmState final_state;    // per-row state at its last real token
  Tensor source_mask;       // [B x T]
};

struct DecoderState {
  LstmState lstm;
  Var context;  // previous attention context (input feeding only)
  bool has_context = false;
};

struct DecodeStepResult {
  Var logits;  // [B x vocab]
  DecoderState state;
  std::optional<Var> attention_weights;  // [B x T_src] when attention is on
};

// Binds one parameter set into one graph: parameter leaves and the attention
// key projections are created once and reused across time steps.
class BoundModel {
 public:
  BoundModel(Graph& g, Seq2SeqParams& params)
      : g_(g), p_(params), enc_cell_(g, params.encoder), dec_cell_(g, params.decoder),
        out_w_(g.param(params.out_w)), out_b_(g.param(params.out_b)) {
    params.config.validate();
  }

  // Unidirectional LSTM over the embedded ids. PAD steps are computed but do
  // not advance the state, so the final state is the one at each row's last
  // real token and the loss cannot depend on padding.
  EncoderOutput encode(const std::vector<std::vector<int>>& ids,
                       const std::vector<std::vector<std::uint8_t>>& mask) {
    const std::size_t batch = ids.size();
    if (batch == 0 || ids[0].empty()) throw ShapeError("encode: empty sequence");
    const std::size_t width = ids[0].size();
    for (std::size_t r = 0; r < batch; ++r) {
      if (ids[r].size() != width || mask[r].size() != width) {
        throw ShapeError("encode: ragged batch rows");
      }
    }

    EncoderOutput out;
    out.source_mask = Tensor::zeros({batch, width});
    for (std::size_t r = 0; r < batch; ++r) {
      for (std::size_t t = 0; t < width; ++t) out.source_mask.at(r, t) = scalar(mask[r][t]);
    }

    LstmState state{g_.input(Tensor::zeros({batch, p_.config.hidden}), "enc.h0"),
                    g_.input(Tensor::zeros({batch, p_.config.hidden}), "enc.c0")};
    out.states.reserve(width);
    for (std::size_t t = 0; t < width; ++t) {
      std::vector<int> column(batch);
      for (std::size_t r = 0; r < batch; ++r) column[r] = ids[r][t];
      Var x = g_.embed_rows(p_.embedding, std::move(column));
      LstmState next = enc_cell_.step(g_, x, state);
      state = blend_by_mask(next, state, mask, t);
      out.states.push_back(state.h);
    }
    out.final_state = state;
    return out;
  }

  // Encoder states enter attention with PAD positions masked out.
  AttentionCache attention_cache(const EncoderOutput& enc) {
    if (!p_.attention) throw ConfigError("attention_cache: attention disabled");
    bind_attention();
    return AttentionCache(g_, wk_, wq_, v_, enc.states, enc.source_mask);
  }

  DecoderState initial_decoder_state(const EncoderOutput& enc) {
    DecoderState s;
    s.lstm = enc.final_state;
    if (p_.config.input_feeding) {
      const std::size_t batch = g_.value(enc.final_state.h).rows();
      s.context = g_.input(Tensor::zeros({batch, p_.config.hidden}), "dec.context0");
      s.has_context = true;
    }
    return s;
  }

  // One decoder step: embed the previous token, advance the LSTM, and
  // project [h; context] (or h alone without attention) onto the vocabulary.
  DecodeStepResult decode_step(const std::vector<int>& prev_ids, const DecoderState& state,
                               const AttentionCache* attn) {
    if (p_.config.attention && attn == nullptr) {
      throw ConfigError("decode_step: attention cache required");
    }
    Parameter& emb =
        p_.target_embedding ? *p_.target_embedding : p_.embedding;
    Var x = g_.embed_rows(emb, prev_ids);
    if (p_.config.input_feeding) {
      if (!state.has_context) throw ConfigError("decode_step: missing context state");
      x = g_.concat_cols({x, state.context});
    }
    LstmState lstm = dec_cell_.step(g_, x, state.lstm);

    DecodeStepResult res;
    res.state.lstm = lstm;
    if (p_.config.attention) {
      AttentionResult att = additive_attention(g_, lstm.h, *attn);
      res.attention_weights = att.weights;
      res.logits = g_.linear(g_.concat_cols({lstm.h, att.context}), out_w_, out_b_);
      if (p_.config.input_feeding) {
        res.state.context = att.context;
        res.state.has_context = true;
      }
    } else {
      res.logits = g_.linear(lstm.h, out_w_, out_b_);
    }
    return res;
  }

  // Teacher forcing: the decoder consumes BOS + target[0..n-1] and predicts
  // target[0..n] including EOS; mean masked cross-entropy over gold positions.
  Var teacher_forced_loss(const Batch& batch) {
    EncoderOutput enc = encode(batch.source, batch.source_mask);
    std::optional<AttentionCache> attn;
    if (p_.config.attention) attn = attention_cache(enc);
    DecoderState state = initial_decoder_state(enc);

    const std::size_t width = batch.target[0].size();
    if (width < 2) throw ShapeError("teacher_forced_loss: target rows too short");
    std::vector<Var> step_logits;
    std::vector<std::vector<int>> golds;
    std::vector<std::vector<std::uint8_t>> gold_mask;
    for (std::size_t t = 0; t + 1 < width; ++t) {
      std::vector<int> prev(batch.size()), gold(batch.size());
      std::vector<std::uint8_t> m(batch.size());
      for (std::size_t r = 0; r < batch.size(); ++r) {
        prev[r] = batch.target[r][t];
        gold[r] = batch.target[r][t + 1];
        m[r] = batch.target_mask[r][t + 1];
      }
      DecodeStepResult step = decode_step(prev, state, attn ? &*attn : nullptr);
      state = step.state;
      step_logits.push_back(step.logits);
      golds.push_back(std::move(gold));
      gold_mask.push_back(std::move(m));
    }
    return masked_cross_entropy(g_, step_logits, golds, gold_mask);
  }

 private:
  LstmState blend_by_mask(const LstmState& next, const LstmState& prev,
                          const std::vector<std::vector<std::uint8_t>>& mask, std::size_t t) {
    const std::size_t batch = mask.size();
    Tensor m({batch, 1}), im({batch, 1});
    bool all_real = true;
    for (std::size_t r = 0; r < batch; ++r) {
      m.v[r] = scalar(mask[r][t]);
      im.v[r] = scalar(1) - m.v[r];
      all_real = all_real && mask[r][t];
    }
    if (all_real) return next;
    Var vm = g_.input(m, "mask");
    Var vim = g_.input(im, "inv_mask");
    return {g_.add(g_.rows_scale(next.h, vm), g_.rows_scale(prev.h, vim)),
            g_.add(g_.rows_scale(next.c, vm), g_.rows_scale(prev.c, vim))};
  }

  void bind_attention() {
    if (!attention_bound_) {
      wk_ = g_.param(p_.attention->wk);
      wq_ = g_.param(p_.attention->wq);
      v_ = g_.param(p_.attention->v);
      attention_bound_ = true;
    }
  }

  Graph& g_;
  Seq2SeqParams& p_;
  LstmCell enc_cell_, dec_cell_;
  Var out_w_, out_b_;
  Var wk_{}, wq_{}, v_{};
  bool attention_bound_ = false;
};

// [OP]-level wrappers ---------------------------------------------------------

inline EncoderOutput encode(Graph& g, const std::vector<std::vector<int>>& ids,
                            const std::vector<std::vector<std::uint8_t>>& mask,
                            Seq2SeqParams& params) {
  BoundModel model(g, params);
  return model.encode(ids, mask);
}

inline Var teacher_forced_loss(Graph& g, const Batch& batch, Seq2SeqParams& params) {
  BoundModel model(g, params);
  return model.teacher_forced_loss(batch);
}

// Greedy argmax decoding, ties broken by lowest token id; stops at EOS or
// config.max_decode_len. Pure function of (params, source, config).
inline std::vector<int> greedy_decode_ids(const std::vector<int>& source_ids,
                                          Seq2SeqParams& params) {
  if (source_ids.empty()) throw ConfigError("greedy_decode: empty source");
  Graph g(false);
  BoundModel model(g, params);
  std::vector<std::vector<std::uint8_t>> mask{
      std::vector<std::uint8_t>(source_ids.size(), 1)};
  EncoderOutput enc = model.encode({source_ids}, mask);
  std::optional<AttentionCache> attn;
  if (params.config.attention) attn = model.attention_cache(enc);
  DecoderState state = model.initial_decoder_state(enc);

  std::vector<int> out;
  int prev = Vocabulary::kBos;
  for (std::size_t step = 0; step < params.config.max_decode_len; ++step) {
    DecodeStepResult res = model.decode_step({prev}, state, attn ? &*attn : nullptr);
    state = res.state;
    const Tensor& logits = g.value(res.logits);
    int best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i) {
      if (logits.v[i] > logits.v[std::size_t(best)]) best = int(i);
    }
    if (best == Vocabulary::kEos) break;
    out.push_back(best);
    prev = best;
  }
  return out;
}

inline std::vector<std::string> greedy_decode(const std::vector<std::string>& source,
                                              Seq2SeqParams& params, const Vocabulary& vocab) {
  if (source.empty()) throw ConfigError("greedy_decode: empty source");
  std::vector<int> ids = vocab.encode(source);
  std::vector<int> out = greedy_decode_ids(ids, params);
  std::vector<std::string> tokens;
  tokens.reserve(out.size());
  for (int id : out) tokens.push_back(vocab.token(id));
  return tokens;
}

// checkpoint I/O --------------------------------------------------------------

inline void save_checkpoint(Seq2SeqParams& params, const Vocabulary& vocab,
                            const std::filesystem::path& path) {
  TensorFile file;
  file.meta = {{"kind", "seq2seq-checkpoint"},
               {"tool_version", kToolVersion},
               {"model", params.config.to_json()}};
  file.vocab_sha = vocab_hash(vocab);
  for (Parameter* p : params.parameters()) file.tensors.emplace_back(p->name, p->value);
  write_tensor_file(file, path);
}

inline Seq2SeqParams load_checkpoint(const std::filesystem::path& path,
                                     const Vocabulary& vocab) {
  TensorFile file = read_tensor_file(path);
  if (!file.meta.contains("model")) {
    throw CheckpointVersionError(path.string() + ": missing model config block");
  }
  if (file.vocab_sha != vocab_hash(vocab)) {
    throw CheckpointHashError(path.string() + ": vocabulary hash mismatch (checkpoint " +
                              hex(file.vocab_sha) + ")");
  }
  ModelConfig config = ModelConfig::from_json(file.meta.at("model"));
  if (config.vocab_size != vocab.size()) {
    throw CheckpointHashError(path.string() + ": vocabulary size mismatch");
  }
  Seq2SeqParams params = Seq2SeqParams::skeleton(config);
  for (Parameter* p : params.parameters()) {
    bool found = false;
    for (auto& [name, tensor] : file.tensors) {
      if (name == p->name) {
        if (tensor.shape != p->value.shape) {
          throw CheckpointVersionError(path.string() + ": tensor " + name + " has shape " +
                                       tensor.shape_str() + ", expected " +
                                       p->value.shape_str());
        }
        p->value = std::move(tensor);
        found = true;
        break;
      }
    }
    if (!found) {
      throw CheckpointVersionError(path.string() + ": tensor " + p->name + " missing");
    }
  }
  return params;
}

}  // namespace entail
