#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "entail/tensor.hpp"

namespace entail {

// Handle into a Graph's node list.
struct Var {
  std::uint32_t idx = 0;
};

// Reverse-mode tape over dense tensors. One graph instance per thread; ops
// append nodes, backward() walks them in reverse. With recording disabled the
// same ops run forward-only (used for greedy decoding).
//
// Every op validates shapes and checks its output for non-finite values;
// violations raise NumericError naming the offending node.
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}

  bool recording() const { return record_; }

  const Tensor& value(Var x) const { return nodes_[x.idx].value; }
  const Tensor& grad(Var x) const { return nodes_[x.idx].grad; }

  Var input(Tensor t, std::string tag = "input") {
    return push(std::move(t), std::move(tag), nullptr, nullptr);
  }

  // Leaf bound to a model parameter; backward adds into p.grad.
  Var param(Parameter& p) {
    Parameter* pp = &p;
    Var out = push(p.value, p.name, nullptr, pp);
    if (record_) {
      nodes_[out.idx].backward = [this, out, pp]() {
        const Tensor& g = nodes_[out.idx].grad;
        for (std::size_t i = 0; i < g.v.size(); ++i) pp->grad.v[i] += g.v[i];
      };
    }
    return out;
  }

  // y = x * w^T + b with x [B x n], w [m x n], b [m] -> [B x m]
  Var linear(Var x, Var w, Var b) { return linear_impl(x, w, &b); }
  Var linear_nobias(Var x, Var w) { return linear_impl(x, w, nullptr); }

  Var add(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) {
      throw ShapeError("add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Tensor out = ta;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += tb.v[i];
    Var o = push(std::move(out), "add");
    if (record_) {
      nodes_[o.idx].backward = [this, o, a, b]() {
        const Tensor& g = nodes_[o.idx].grad;
        accumulate(a, g.v.data(), g.v.size());
        accumulate(b, g.v.data(), g.v.size());
      };
    }
    return o;
  }

  Var mul(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) {
      throw ShapeError("mul: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Tensor out = ta;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= tb.v[i];
    Var o = push(std::move(out), "mul");
    if (record_) {
      nodes_[o.idx].backward = [this, o, a, b]() {
        const Tensor& g = nodes_[o.idx].grad;
        const Tensor& va = nodes_[a.idx].value;
        const Tensor& vb = nodes_[b.idx].value;
        Tensor& ga = grad_slot(a);
        Tensor& gb = grad_slot(b);
        for (std::size_t i = 0; i < g.v.size(); ++i) {
          ga.v[i] += g.v[i] * vb.v[i];
          gb.v[i] += g.v[i] * va.v[i];
        }
      };
    }
    return o;
  }

  Var scale(Var a, scalar c) {
    Tensor out = value(a);
    for (scalar& x : out.v) x *= c;
    Var o = push(std::move(out), "scale");
    if (record_) {
      nodes_[o.idx].backward = [this, o, a, c]() {
        const Tensor& g = nodes_[o.idx].grad;
        Tensor& ga = grad_slot(a);
        for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * c;
      };
    }
    return o;
  }

  Var sigmoid(Var a) {
    Tensor out = value(a);
    for (scalar& x : out.v) x = scalar(1) / (scalar(1) + std::exp(-x));
    Var o = push(std::move(out), "sigmoid");
    if (record_) {
      nodes_[o.idx].backward = [this, o, a]() {
        const Tensor& g = nodes_[o.idx].grad;
        const Tensor& y = nodes_[o.idx].value;
        Tensor& ga = grad_slot(a);
        for (std::size_t i = 0; i < g.v.size(); ++i) {
          ga.v[i] += g.v[i] * y.v[i] * (scalar(1) - y.v[i]);
        }
      };
    }
    return o;
  }

  Var tanh(Var a) {
    Tensor out = value(a);
    for (scalar& x : out.v) x = std::tanh(x);
    Var o = push(std::move(out), "tanh");
    if (record_) {
      nodes_[o.idx].backward = [this, o, a]() {
        const Tensor& g = nodes_[o.idx].grad;
        const Tensor& y = nodes_[o.idx].value;
        Tensor& ga = grad_slot(a);
        for (std::size_t i = 0; i < g.v.size(); ++i) {
          ga.v[i] += g.v[i] * (scalar(1) - y.v[i] * y.v[i]);
        }
      };
    }
    return o;
  }

  Var slice_cols(Var a, std::size_t c0, std::size_t c1) {
    const Tensor& ta = value(a);
    if (ta.rank() != 2 || c1 > ta.cols() || c0 >= c1) {
      throw ShapeError("slice_cols: bad range on " + ta.shape_str());
    }
    const std::size_t rows = ta.rows(), cols = ta.cols(), w = c1 - c0;
    Tensor out({rows, w});
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < w; ++c) out.v[r * w + c] = ta.v[r * cols + c0 + c];
    }
    Var o = push(std::move(out), "slice_cols");
    if (record_) {
      nodes_[o.idx].backward = [this, o, a, c0, w]() {
        const Tensor& g = nodes_[o.idx].grad;
        Tensor& ga = grad_slot(a);
        const std::size_t cols = ga.shape[1];
        for (std::size_t r = 0; r < g.shape[0]; ++r) {
          for (std::size_t c = 0; c < w; ++c) ga.v[r * cols + c0 + c] += g.v[r * w + c];
        }
      };
    }
    return o;
  }

  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t rows = value(parts[0]).rows();
    std::size_t total = 0;
    for (Var p : parts) {
      if (value(p).rank() != 2 || value(p).rows() != rows) {
        throw ShapeError("concat_cols: row mismatch");
      }
      total += value(p).cols();
    }
    Tensor out({rows, total});
    std::size_t off = 0;
    for (Var p : parts) {
      const Tensor& tp = value(p);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < tp.cols(); ++c) out.v[r * total + off + c] = tp.at(r, c);
      }
      off += tp.cols();
    }
    Var o = push(std::move(out), "concat_cols");
    if (record_) {
      std::vector<Var> ps = parts;
      nodes_[o.idx].backward = [this, o, ps, total]() {
        const Tensor& g = nodes_[o.idx].grad;
        std::size_t off = 0;
        for (Var p : ps) {
          Tensor& gp = grad_slot(p);
          const std::size_t w = gp.shape[1];
          for (std::size_t r = 0; r < g.shape[0]; ++r) {
            for (std::size_t c = 0; c < w; ++c) gp.v[r * w + c] += g.v[r * total + off + c];
          }
          off += w;
        }
      };
    }
    return o;
  }

  // m [B x h] scaled per-row by w [B x 1]
  Var rows_scale(Var m, Var w) {
    const Tensor& tm = value(m);
    const Tensor& tw = value(w);
    if (tm.rank() != 2 || tw.rank() != 2 || tw.cols() != 1 || tw.rows() != tm.rows()) {
      throw ShapeError("rows_scale: want [BxH] and [Bx1], got " + tm.shape_str() + " and " +
                       tw.shape_str());
    }
    const std::size_t rows = tm.rows(), cols = tm.cols();
    Tensor out = tm;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) out.v[r * cols + c] *= tw.v[r];
    }
    Var o = push(std::move(out), "rows_scale");
    if (record_) {
      nodes_[o.idx].backward = [this, o, m, w]() {
        const Tensor& g = nodes_[o.idx].grad;
        const Tensor& vm = nodes_[m.idx].value;
        const Tensor& vw = nodes_[w.idx].value;
        Tensor& gm = grad_slot(m);
        Tensor& gw = grad_slot(w);
        const std::size_t rows = vm.shape[0], cols = vm.shape[1];
        for (std::size_t r = 0; r < rows; ++r) {
          scalar acc = 0;
          for (std::size_t c = 0; c < cols; ++c) {
            gm.v[r * cols + c] += g.v[r * cols + c] * vw.v[r];
            acc += g.v[r * cols + c] * vm.v[r * cols + c];
          }
          gw.v[r] += acc;
        }
      };
    }
    return o;
  }

  // Row-wise softmax over positions where mask != 0; masked entries are
  // exactly 0 in the output. Rows with no unmasked position are an error.
  Var masked_softmax_rows(Var scores, const Tensor& mask) {
    const Tensor& ts = value(scores);
    if (!ts.same_shape(mask)) {
      throw ShapeError("masked_softmax_rows: mask shape " + mask.shape_str() +
                       " != scores shape " + ts.shape_str());
    }
    const std::size_t rows = ts.rows(), cols = ts.cols();
    Tensor out({rows, cols});
    for (std::size_t r = 0; r < rows; ++r) {
      scalar mx = -std::numeric_limits<scalar>::infinity();
      bool any = false;
      for (std::size_t c = 0; c < cols; ++c) {
        if (mask.v[r * cols + c] != scalar(0)) {
          any = true;
          mx = std::max(mx, ts.v[r * cols + c]);
        }
      }
      if (!any) throw NumericError("masked_softmax_rows: all positions masked in row");
      scalar sum = 0;
      for (std::size_t c = 0; c < cols; ++c) {
        if (mask.v[r * cols + c] != scalar(0)) {
          const scalar e = std::exp(ts.v[r * cols + c] - mx);
          out.v[r * cols + c] = e;
          sum += e;
        }
      }
      for (std::size_t c = 0; c < cols; ++c) out.v[r * cols + c] /= sum;
    }
    Var o = push(std::move(out), "masked_softmax");
    if (record_) {
      nodes_[o.idx].backward = [this, o, scores]() {
        const Tensor& g = nodes_[o.idx].grad;
        const Tensor& y = nodes_[o.idx].value;
        Tensor& gs = grad_slot(scores);
        const std::size_t rows = y.shape[0], cols = y.shape[1];
        for (std::size_t r = 0; r < rows; ++r) {
          scalar dot = 0;
          for (std::size_t c = 0; c < cols; ++c) dot += g.v[r * cols + c] * y.v[r * cols + c];
          for (std::size_t c = 0; c < cols; ++c) {
            gs.v[r * cols + c] += y.v[r * cols + c] * (g.v[r * cols + c] - dot);
          }
        }
      };
    }
    return o;
  }

  // Rows of an embedding-style matrix gathered by id -> [ids.size() x d].
  Var gather_rows(Var m, std::vector<int> ids) {
    const Tensor& tm = value(m);
    if (tm.rank() != 2) throw ShapeError("gather_rows: rank-2 tensor required");
    const std::size_t d = tm.cols();
    Tensor out({ids.size(), d});
    for (std::size_t r = 0; r < ids.size(); ++r) {
      const int id = ids[r];
      if (id < 0 || std::size_t(id) >= tm.rows()) {
        throw ShapeError("gather_rows: id " + std::to_string(id) + " out of range for " +
                         tm.shape_str());
      }
      for (std::size_t c = 0; c < d; ++c) out.v[r * d + c] = tm.v[std::size_t(id) * d + c];
    }
    Var o = push(std::move(out), "gather_rows");
    if (record_) {
      nodes_[o.idx].backward = [this, o, m, ids = std::move(ids), d]() {
        const Tensor& g = nodes_[o.idx].grad;
        Tensor& gm = grad_slot(m);
        for (std::size_t r = 0; r < ids.size(); ++r) {
          for (std::size_t c = 0; c < d; ++c) {
            gm.v[std::size_t(ids[r]) * d + c] += g.v[r * d + c];
          }
        }
      };
    }
    return o;
  }

  // Embedding lookup fused with the parameter leaf: avoids materializing the
  // full [V x d] matrix in the graph. Backward scatters into p.grad.
  Var embed_rows(Parameter& p, std::vector<int> ids) {
    const Tensor& tm = p.value;
    if (tm.rank() != 2) throw ShapeError("embed_rows: rank-2 parameter required");
    const std::size_t d = tm.cols();
    Tensor out({ids.size(), d});
    for (std::size_t r = 0; r < ids.size(); ++r) {
      const int id = ids[r];
      if (id < 0 || std::size_t(id) >= tm.rows()) {
        throw ShapeError("embed_rows: id " + std::to_string(id) + " out of range for " +
                         p.name + " " + tm.shape_str());
      }
      for (std::size_t c = 0; c < d; ++c) out.v[r * d + c] = tm.v[std::size_t(id) * d + c];
    }
    Var o = push(std::move(out), p.name + ".rows");
    if (record_) {
      Parameter* pp = &p;
      nodes_[o.idx].backward = [this, o, pp, ids = std::move(ids), d]() {
        const Tensor& g = nodes_[o.idx].grad;
        for (std::size_t r = 0; r < ids.size(); ++r) {
          for (std::size_t c = 0; c < d; ++c) {
            pp->grad.v[std::size_t(ids[r]) * d + c] += g.v[r * d + c];
          }
        }
      };
    }
    return o;
  }

  // Per-row negative log softmax probability of the target id, 0 where the
  // row is masked out -> [B x 1].
  Var pick_nll(Var logits, std::vector<int> targets, std::vector<std::uint8_t> mask) {
    const Tensor& tl = value(logits);
    if (tl.rank() != 2 || targets.size() != tl.rows() || mask.size() != tl.rows()) {
      throw ShapeError("pick_nll: want logits [BxV] with B targets and B mask entries");
    }
    const std::size_t rows = tl.rows(), vocab = tl.cols();
    Tensor out({rows, 1});
    std::vector<scalar> lse(rows, scalar(0));
    for (std::size_t r = 0; r < rows; ++r) {
      if (!mask[r]) continue;
      const int t = targets[r];
      if (t < 0 || std::size_t(t) >= vocab) {
        throw ShapeError("pick_nll: target id out of range");
      }
      scalar mx = tl.v[r * vocab];
      for (std::size_t c = 1; c < vocab; ++c) mx = std::max(mx, tl.v[r * vocab + c]);
      scalar sum = 0;
      for (std::size_t c = 0; c < vocab; ++c) sum += std::exp(tl.v[r * vocab + c] - mx);
      lse[r] = mx + std::log(sum);
      out.v[r] = lse[r] - tl.v[r * vocab + std::size_t(t)];
    }
    Var o = push(std::move(out), "pick_nll");
    if (record_) {
      nodes_[o.idx].backward = [this, o, logits, targets = std::move(targets),
                                mask = std::move(mask), lse = std::move(lse)]() {
        const Tensor& g = nodes_[o.idx].grad;
        const Tensor& vl = nodes_[logits.idx].value;
        Tensor& gl = grad_slot(logits);
        const std::size_t vocab = vl.shape[1];
        for (std::size_t r = 0; r < targets.size(); ++r) {
          if (!mask[r]) continue;
          const scalar go = g.v[r];
          for (std::size_t c = 0; c < vocab; ++c) {
            scalar p = std::exp(vl.v[r * vocab + c] - lse[r]);
            if (c == std::size_t(targets[r])) p -= scalar(1);
            gl.v[r * vocab + c] += go * p;
          }
        }
      };
    }
    return o;
  }

  // Sum of all elements -> shape {1}.
  Var sum(Var a) {
    const Tensor& ta = value(a);
    scalar s = 0;
    for (scalar x : ta.v) s += x;
    Tensor out({1});
    out.v[0] = s;
    Var o = push(std::move(out), "sum");
    if (record_) {
      nodes_[o.idx].backward = [this, o, a]() {
        const scalar g = nodes_[o.idx].grad.v[0];
        Tensor& ga = grad_slot(a);
        for (scalar& x : ga.v) x += g;
      };
    }
    return o;
  }

  // Reverse pass from a scalar loss; call once per graph. Gradient
  // accumulation follows the fixed reverse node order, so results are
  // reproducible.
  void backward(Var loss) {
    if (!record_) throw ConfigError("backward: graph built with recording disabled");
    if (value(loss).size() != 1) throw ShapeError("backward: loss must be scalar");
    for (Node& n : nodes_) {
      if (n.grad.v.empty()) n.grad = Tensor::zeros(n.value.shape);
    }
    nodes_[loss.idx].grad.v[0] = scalar(1);
    for (std::size_t i = nodes_.size(); i > 0; --i) {
      Node& n = nodes_[i - 1];
      if (n.backward) n.backward();
      if (n.param != nullptr) require_finite(n.param->grad, n.tag + ".grad");
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void()> backward;
    std::string tag;
    Parameter* param = nullptr;
  };

  Var push(Tensor value, std::string tag, std::function<void()> bw = nullptr,
           Parameter* param = nullptr) {
    require_finite(value, tag);
    Node n;
    n.value = std::move(value);
    n.tag = std::move(tag);
    n.backward = std::move(bw);
    n.param = param;
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  Tensor& grad_slot(Var x) {
    Node& n = nodes_[x.idx];
    if (n.grad.v.empty()) n.grad = Tensor::zeros(n.value.shape);
    return n.grad;
  }

  void accumulate(Var x, const scalar* g, std::size_t n) {
    Tensor& gx = grad_slot(x);
    for (std::size_t i = 0; i < n; ++i) gx.v[i] += g[i];
  }

  Var linear_impl(Var x, Var w, const Var* b) {
    const Tensor& tx = value(x);
    const Tensor& tw = value(w);
    if (tx.rank() != 2 || tw.rank() != 2 || tx.cols() != tw.cols()) {
      throw ShapeError("linear: want x [Bxn], w [mxn], got " + tx.shape_str() + " and " +
                       tw.shape_str());
    }
    const std::size_t batch = tx.rows(), in = tx.cols(), out_dim = tw.rows();
    if (b != nullptr) {
      const Tensor& tb = value(*b);
      if (tb.size() != out_dim) throw ShapeError("linear: bias size mismatch");
    }
    Tensor out({batch, out_dim});
    for (std::size_t r = 0; r < batch; ++r) {
      const scalar* xr = tx.v.data() + r * in;
      for (std::size_t m = 0; m < out_dim; ++m) {
        const scalar* wr = tw.v.data() + m * in;
        scalar acc = (b != nullptr) ? value(*b).v[m] : scalar(0);
        for (std::size_t k = 0; k < in; ++k) acc += xr[k] * wr[k];
        out.v[r * out_dim + m] = acc;
      }
    }
    Var o = push(std::move(out), "linear");
    if (record_) {
      const bool has_bias = (b != nullptr);
      Var bias = has_bias ? *b : Var{};
      nodes_[o.idx].backward = [this, o, x, w, bias, has_bias, batch, in, out_dim]() {
        const Tensor& g = nodes_[o.idx].grad;
        const Tensor& vx = nodes_[x.idx].value;
        const Tensor& vw = nodes_[w.idx].value;
        Tensor& gx = grad_slot(x);
        Tensor& gw = grad_slot(w);
        for (std::size_t r = 0; r < batch; ++r) {
          const scalar* gr = g.v.data() + r * out_dim;
          const scalar* xr = vx.v.data() + r * in;
          scalar* gxr = gx.v.data() + r * in;
          for (std::size_t m = 0; m < out_dim; ++m) {
            const scalar gm = gr[m];
            if (gm == scalar(0)) continue;
            const scalar* wr = vw.v.data() + m * in;
            scalar* gwr = gw.v.data() + m * in;
            for (std::size_t k = 0; k < in; ++k) {
              gxr[k] += gm * wr[k];
              gwr[k] += gm * xr[k];
            }
          }
        }
        if (has_bias) {
          Tensor& gb = grad_slot(bias);
          for (std::size_t r = 0; r < batch; ++r) {
            for (std::size_t m = 0; m < out_dim; ++m) gb.v[m] += g.v[r * out_dim + m];
          }
        }
      };
    }
    return o;
  }

  std::vector<Node> nodes_;
  bool record_;
};

}  // namespace entail
