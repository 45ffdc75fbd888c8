#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "entail/common.hpp"

namespace entail {

// Dense row-major tensor. Rank 1 or 2 is all the model needs.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<scalar> v;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    v.assign(count(shape), scalar(0));
  }

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

  static Tensor full(std::vector<std::size_t> s, scalar value) {
    Tensor t(std::move(s));
    std::fill(t.v.begin(), t.v.end(), value);
    return t;
  }

  static Tensor row(std::vector<scalar> values) {
    Tensor t;
    t.shape = {1, values.size()};
    t.v = std::move(values);
    return t;
  }

  static Tensor vec(std::vector<scalar> values) {
    Tensor t;
    t.shape = {values.size()};
    t.v = std::move(values);
    return t;
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<scalar> values) {
    if (values.size() != rows * cols) throw ShapeError("Tensor::matrix: value count mismatch");
    Tensor t;
    t.shape = {rows, cols};
    t.v = std::move(values);
    return t;
  }

  std::size_t size() const { return v.size(); }
  std::size_t rank() const { return shape.size(); }

  std::size_t rows() const {
    if (rank() != 2) throw ShapeError("Tensor::rows: rank-2 tensor required");
    return shape[0];
  }
  std::size_t cols() const {
    if (rank() != 2) throw ShapeError("Tensor::cols: rank-2 tensor required");
    return shape[1];
  }

  scalar& at(std::size_t r, std::size_t c) { return v[r * shape[1] + c]; }
  scalar at(std::size_t r, std::size_t c) const { return v[r * shape[1] + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void fill(scalar value) { std::fill(v.begin(), v.end(), value); }

  std::string shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) os << 'x';
      os << shape[i];
    }
    os << ']';
    return os.str();
  }
};

inline bool all_finite(const Tensor& t) {
  for (scalar x : t.v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline void require_finite(const Tensor& t, const std::string& what) {
  if (!all_finite(t)) {
    throw NumericError("non-finite value in tensor '" + what + "' " + t.shape_str());
  }
}

// Model weight with its gradient accumulation slot. Gradients are zeroed by
// the optimizer step; backward passes add into them.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor val) : name(std::move(n)), value(std::move(val)) {
    grad = Tensor::zeros(value.shape);
  }

  void zero_grad() { grad.fill(scalar(0)); }
};

}  // namespace entail
