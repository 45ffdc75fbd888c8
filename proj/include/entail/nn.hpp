#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "entail/autodiff.hpp"
#include "entail/common.hpp"

namespace entail {

// LSTM weights with gate order [input i, forget f, cell g, output o]:
//   w [4h x in], u [4h x h], b [4h]
struct LstmWeights {
  Parameter w, u, b;

  LstmWeights() = default;

  LstmWeights(const std::string& prefix, std::size_t hidden, std::size_t input) {
    w = Parameter(prefix + ".w", Tensor::zeros({4 * hidden, input}));
    u = Parameter(prefix + ".u", Tensor::zeros({4 * hidden, hidden}));
    b = Parameter(prefix + ".b", Tensor::zeros({4 * hidden}));
  }

  std::size_t hidden() const { return u.value.cols(); }
  std::size_t input() const { return w.value.cols(); }

  // Common practice: forget-gate bias starts at 1 so memories persist early
  // in training.
  void set_forget_bias(scalar value) {
    const std::size_t h = hidden();
    for (std::size_t i = h; i < 2 * h; ++i) b.value.v[i] = value;
  }
};

struct LstmState {
  Var h, c;
};

// Graph-bound LSTM weights (leaves created once per graph, reused each step).
struct LstmCell {
  Var w, u, b;
  std::size_t hidden = 0;

  LstmCell(Graph& g, LstmWeights& weights)
      : w(g.param(weights.w)), u(g.param(weights.u)), b(g.param(weights.b)),
        hidden(weights.hidden()) {}

  LstmCell(Var w_, Var u_, Var b_, std::size_t hidden_)
      : w(w_), u(u_), b(b_), hidden(hidden_) {}

  // x [B x in], state {h,c} [B x h] -> next state. Standard LSTM:
  //   i = sig(.), f = sig(.), g = tanh(.), o = sig(.)
  //   c' = f*c + i*g,  h' = o*tanh(c')
  LstmState step(Graph& g, Var x, const LstmState& prev) const {
    Var gates = g.add(g.linear(x, w, b), g.linear_nobias(prev.h, u));
    const std::size_t h = hidden;
    Var gi = g.sigmoid(g.slice_cols(gates, 0, h));
    Var gf = g.sigmoid(g.slice_cols(gates, h, 2 * h));
    Var gg = g.tanh(g.slice_cols(gates, 2 * h, 3 * h));
    Var go = g.sigmoid(g.slice_cols(gates, 3 * h, 4 * h));
    Var c_next = g.add(g.mul(gf, prev.c), g.mul(gi, gg));
    Var h_next = g.mul(go, g.tanh(c_next));
    return {h_next, c_next};
  }
};

// One free-standing LSTM step; the [OP]-level surface used by the tests.
inline LstmState lstm_cell(Graph& g, Var x, const LstmState& prev, LstmWeights& weights) {
  LstmCell cell(g, weights);
  return cell.step(g, x, prev);
}

// Additive attention scorer: e_i = v . tanh(Wk k_i + Wq q).
struct AttentionWeights {
  Parameter wk, wq, v;

  AttentionWeights() = default;

  AttentionWeights(const std::string& prefix, std::size_t attn_dim, std::size_t key_dim,
                   std::size_t query_dim) {
    wk = Parameter(prefix + ".wk", Tensor::zeros({attn_dim, key_dim}));
    wq = Parameter(prefix + ".wq", Tensor::zeros({attn_dim, query_dim}));
    v = Parameter(prefix + ".v", Tensor::zeros({1, attn_dim}));
  }

  std::size_t attn_dim() const { return wk.value.rows(); }
};

struct AttentionResult {
  Var weights;  // [B x T], rows sum to 1 over unmasked positions, 0 elsewhere
  Var context;  // [B x h], convex combination of the keys
};

// Key projections Wk k_t do not depend on the query; computing them once per
// graph and reusing across decoder steps is the whole point of this cache.
struct AttentionCache {
  Var wk, wq, v;
  std::vector<Var> keys;       // T tensors [B x h]
  std::vector<Var> key_projs;  // T tensors [B x a]
  Tensor mask;                 // [B x T], 1 = real position

  AttentionCache(Graph& g, AttentionWeights& weights, const std::vector<Var>& encoder_states,
                 Tensor key_mask)
      : wk(g.param(weights.wk)), wq(g.param(weights.wq)), v(g.param(weights.v)),
        keys(encoder_states), mask(std::move(key_mask)) {
    key_projs.reserve(keys.size());
    for (Var k : keys) key_projs.push_back(g.linear_nobias(k, wk));
  }

  AttentionCache(Graph& g, Var wk_, Var wq_, Var v_, const std::vector<Var>& encoder_states,
                 Tensor key_mask)
      : wk(wk_), wq(wq_), v(v_), keys(encoder_states), mask(std::move(key_mask)) {
    key_projs.reserve(keys.size());
    for (Var k : keys) key_projs.push_back(g.linear_nobias(k, wk));
  }
};

// Word-by-word attention for one decoder step. query [B x h] against the
// cached encoder states; masked positions get exactly zero weight.
inline AttentionResult additive_attention(Graph& g, Var query, const AttentionCache& cache) {
  if (cache.keys.empty()) throw ShapeError("additive_attention: no keys");
  Var qp = g.linear_nobias(query, cache.wq);
  std::vector<Var> scores;
  scores.reserve(cache.keys.size());
  for (std::size_t t = 0; t < cache.keys.size(); ++t) {
    Var e = g.linear_nobias(g.tanh(g.add(cache.key_projs[t], qp)), cache.v);
    scores.push_back(e);  // [B x 1]
  }
  Var score_mat = g.concat_cols(scores);          // [B x T]
  Var weights = g.masked_softmax_rows(score_mat, cache.mask);
  Var context;
  for (std::size_t t = 0; t < cache.keys.size(); ++t) {
    Var term = g.rows_scale(cache.keys[t], g.slice_cols(weights, t, t + 1));
    context = (t == 0) ? term : g.add(context, term);
  }
  return {weights, context};
}

// Convenience overload building the cache on the fly (single-shot use).
inline AttentionResult additive_attention(Graph& g, Var query, AttentionWeights& weights,
                                          const std::vector<Var>& keys, Tensor mask) {
  AttentionCache cache(g, weights, keys, std::move(mask));
  return additive_attention(g, query, cache);
}

// Mean of -log softmax(logits)[target] over unmasked positions.
//
//   step_logits  one [B x V] tensor per decoder step
//   targets      per step, B gold ids
//   mask         per step, B flags; PAD positions contribute nothing
inline Var masked_cross_entropy(Graph& g, const std::vector<Var>& step_logits,
                                const std::vector<std::vector<int>>& targets,
                                const std::vector<std::vector<std::uint8_t>>& mask) {
  if (step_logits.empty() || step_logits.size() != targets.size() ||
      step_logits.size() != mask.size()) {
    throw ShapeError("masked_cross_entropy: step count mismatch");
  }
  std::size_t live = 0;
  for (const auto& m : mask) {
    for (std::uint8_t b : m) live += (b != 0);
  }
  if (live == 0) throw NumericError("masked_cross_entropy: no unmasked position");
  Var total;
  for (std::size_t t = 0; t < step_logits.size(); ++t) {
    Var nll = g.sum(g.pick_nll(step_logits[t], targets[t], mask[t]));
    total = (t == 0) ? nll : g.add(total, nll);
  }
  return g.scale(total, scalar(1) / scalar(live));
}

}  // namespace entail
