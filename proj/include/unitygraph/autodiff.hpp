#pragma once

// Tensor-level reverse-mode differentiation. Every value on the tape is a
// Matrix; operators record a closure that pushes the output gradient back to
// their inputs. The tape is single-use: build, call backward() once, discard.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "unitygraph/error.hpp"
#include "unitygraph/matrix.hpp"

namespace unitygraph {

/// Shared, immutable row index list (gather targets, segment ids).
using Index = std::shared_ptr<const std::vector<std::size_t>>;

inline Index make_index(std::vector<std::size_t> ids) {
  return std::make_shared<const std::vector<std::size_t>>(std::move(ids));
}

/// Named, ordered collection of trainable matrices with gradient buffers.
template <class S>
class ParamStore {
 public:
  struct Param {
    std::string name;
    Matrix<S> value;
    Matrix<S> grad;
  };

  std::size_t add(std::string name, std::size_t rows, std::size_t cols) {
    if (lookup_.count(name) != 0) {
      throw Error(ErrorKind::config_invalid, "duplicate parameter name " + name);
    }
    lookup_.emplace(name, params_.size());
    params_.push_back({std::move(name), Matrix<S>(rows, cols), Matrix<S>(rows, cols)});
    return params_.size() - 1;
  }

  std::size_t size() const noexcept { return params_.size(); }
  Param& operator[](std::size_t i) { return params_[i]; }
  const Param& operator[](std::size_t i) const { return params_[i]; }

  std::size_t index_of(const std::string& name) const {
    auto it = lookup_.find(name);
    if (it == lookup_.end()) throw Error(ErrorKind::config_invalid, "unknown parameter " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return lookup_.count(name) != 0; }

  std::size_t scalar_count() const {
    std::size_t total = 0;
    for (const auto& p : params_) total += p.value.size();
    return total;
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.fill(S(0));
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

template <class S>
class Tape;

/// Handle to a value recorded on a tape.
template <class S>
struct Var {
  Tape<S>* tape = nullptr;
  std::size_t id = 0;

  const Matrix<S>& value() const { return tape->value(*this); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

template <class S>
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  Tape() { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<S> constant(Matrix<S> value) { return push(std::move(value), false, nullptr); }

  /// Leaf whose gradient is retained (used for input-gradient checks).
  Var<S> variable(Matrix<S> value) { return push(std::move(value), true, nullptr); }

  /// Leaf bound to a parameter; gradients flow back into store.grad on backward().
  Var<S> parameter(ParamStore<S>& store, std::size_t index) {
    if (store_ != nullptr && store_ != &store) {
      throw Error(ErrorKind::config_invalid, "tape already bound to another parameter store");
    }
    store_ = &store;
    if (param_nodes_.size() < store.size()) param_nodes_.resize(store.size(), npos);
    if (param_nodes_[index] == npos) {
      Var<S> v = push(store[index].value, true, nullptr);
      param_nodes_[index] = v.id;
    }
    return {this, param_nodes_[index]};
  }

  Var<S> record(Matrix<S> value, std::initializer_list<Var<S>> inputs, Backward backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || nodes_[in.id].requires_grad;
    return push(std::move(value), needs, needs ? std::move(backward) : nullptr);
  }

  Var<S> record(Matrix<S> value, const std::vector<Var<S>>& inputs, Backward backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || nodes_[in.id].requires_grad;
    return push(std::move(value), needs, needs ? std::move(backward) : nullptr);
  }

  const Matrix<S>& value(Var<S> v) const { return nodes_[v.id].value; }
  const Matrix<S>& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient buffer of a node, allocated on first use.
  Matrix<S>& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() != n.value.size()) n.grad = Matrix<S>(n.value.rows(), n.value.cols());
    return n.grad;
  }
  Matrix<S> grad_of(Var<S> v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.size() != n.value.size()) return Matrix<S>(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// Backpropagates from a 1x1 root and accumulates parameter gradients.
  void backward(Var<S> root) {
    if (nodes_[root.id].value.size() != 1) {
      throw Error(ErrorKind::shape_mismatch, "backward() requires a scalar root");
    }
    grad(root.id)[0] = S(1);
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.size() == 0) continue;
      n.backward(*this, i);
    }
    if (store_ == nullptr) return;
    for (std::size_t p = 0; p < param_nodes_.size(); ++p) {
      if (param_nodes_[p] == npos) continue;
      const Node& n = nodes_[param_nodes_[p]];
      if (n.grad.size() == 0) continue;
      auto& g = (*store_)[p].grad;
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  struct Node {
    Matrix<S> value;
    Matrix<S> grad;
    Backward backward;
    bool requires_grad = false;
  };

  Var<S> push(Matrix<S> value, bool requires_grad, Backward backward) {
    nodes_.push_back({std::move(value), Matrix<S>(), std::move(backward), requires_grad});
    return {this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  std::vector<std::size_t> param_nodes_;
  ParamStore<S>* store_ = nullptr;
};

namespace ad {

namespace detail {

template <class S>
void require_same(const Matrix<S>& a, const Matrix<S>& b, const char* op) {
  if (!a.same_shape(b)) throw Error(ErrorKind::shape_mismatch, std::string(op) + ": operand shapes differ");
}

template <class S>
void add_into(Tape<S>& t, std::size_t id, const Matrix<S>& delta) {
  if (!t.requires_grad(id)) return;
  auto& g = t.grad(id);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

}  // namespace detail

/// C = A * B.
template <class S>
Var<S> matmul(Var<S> a, Var<S> b) {
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.cols() != B.rows()) throw Error(ErrorKind::shape_mismatch, "matmul: inner dimensions differ");
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Matrix<S> C(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    S* crow = C.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const S av = A(i, p);
      if (av == S(0)) continue;
      const S* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return a.tape->record(std::move(C), {a, b}, [ai = a.id, bi = b.id, m, k, n](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    const auto& A = t.value(ai);
    const auto& B = t.value(bi);
    if (t.requires_grad(ai)) {
      auto& gA = t.grad(ai);
      for (std::size_t i = 0; i < m; ++i) {
        const S* grow = G.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const S* brow = B.data() + p * n;
          S acc = 0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          gA(i, p) += acc;
        }
      }
    }
    if (t.requires_grad(bi)) {
      auto& gB = t.grad(bi);
      for (std::size_t i = 0; i < m; ++i) {
        const S* grow = G.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const S av = A(i, p);
          if (av == S(0)) continue;
          S* gbrow = gB.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
        }
      }
    }
  });
}

template <class S>
Var<S> add(Var<S> a, Var<S> b) {
  detail::require_same(a.value(), b.value(), "add");
  Matrix<S> C = a.value();
  const auto& B = b.value();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] += B[i];
  return a.tape->record(std::move(C), {a, b}, [ai = a.id, bi = b.id](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    detail::add_into(t, ai, G);
    detail::add_into(t, bi, G);
  });
}

template <class S>
Var<S> sub(Var<S> a, Var<S> b) {
  detail::require_same(a.value(), b.value(), "sub");
  Matrix<S> C = a.value();
  const auto& B = b.value();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] -= B[i];
  return a.tape->record(std::move(C), {a, b}, [ai = a.id, bi = b.id](Tape<S>& t, std::size_t self) {
    Matrix<S> G = t.grad(self);
    detail::add_into(t, ai, G);
    for (std::size_t i = 0; i < G.size(); ++i) G[i] = -G[i];
    detail::add_into(t, bi, G);
  });
}

/// Elementwise product.
template <class S>
Var<S> hadamard(Var<S> a, Var<S> b) {
  detail::require_same(a.value(), b.value(), "hadamard");
  Matrix<S> C = a.value();
  const auto& B = b.value();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] *= B[i];
  return a.tape->record(std::move(C), {a, b}, [ai = a.id, bi = b.id](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    const auto& A = t.value(ai);
    const auto& B = t.value(bi);
    if (t.requires_grad(ai)) {
      auto& gA = t.grad(ai);
      for (std::size_t i = 0; i < G.size(); ++i) gA[i] += G[i] * B[i];
    }
    if (t.requires_grad(bi)) {
      auto& gB = t.grad(bi);
      for (std::size_t i = 0; i < G.size(); ++i) gB[i] += G[i] * A[i];
    }
  });
}

/// Adds a [1, cols] bias row to every row of a.
template <class S>
Var<S> add_row(Var<S> a, Var<S> bias) {
  const auto& A = a.value();
  const auto& b = bias.value();
  if (b.rows() != 1 || b.cols() != A.cols()) throw Error(ErrorKind::shape_mismatch, "add_row: bias shape");
  Matrix<S> C = A;
  for (std::size_t i = 0; i < C.rows(); ++i)
    for (std::size_t j = 0; j < C.cols(); ++j) C(i, j) += b[j];
  return a.tape->record(std::move(C), {a, bias}, [ai = a.id, bi = bias.id](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    detail::add_into(t, ai, G);
    if (t.requires_grad(bi)) {
      auto& gb = t.grad(bi);
      for (std::size_t i = 0; i < G.rows(); ++i)
        for (std::size_t j = 0; j < G.cols(); ++j) gb[j] += G(i, j);
    }
  });
}

/// alpha * a + beta, elementwise.
template <class S>
Var<S> affine(Var<S> a, S alpha, S beta = S(0)) {
  Matrix<S> C = a.value();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] = alpha * C[i] + beta;
  return a.tape->record(std::move(C), {a}, [ai = a.id, alpha](Tape<S>& t, std::size_t self) {
    if (!t.requires_grad(ai)) return;
    const auto& G = t.grad(self);
    auto& gA = t.grad(ai);
    for (std::size_t i = 0; i < G.size(); ++i) gA[i] += alpha * G[i];
  });
}

template <class S>
Var<S> scale(Var<S> a, S factor) {
  return affine(a, factor, S(0));
}

template <class S>
Var<S> relu(Var<S> a) {
  Matrix<S> C = a.value();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] = C[i] > S(0) ? C[i] : S(0);
  return a.tape->record(std::move(C), {a}, [ai = a.id](Tape<S>& t, std::size_t self) {
    if (!t.requires_grad(ai)) return;
    const auto& G = t.grad(self);
    const auto& A = t.value(ai);
    auto& gA = t.grad(ai);
    for (std::size_t i = 0; i < G.size(); ++i)
      if (A[i] > S(0)) gA[i] += G[i];
  });
}

template <class S>
Var<S> sigmoid(Var<S> a) {
  Matrix<S> C = a.value();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] = S(1) / (S(1) + std::exp(-C[i]));
  return a.tape->record(std::move(C), {a}, [ai = a.id](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    const auto& Y = t.value(self);
    auto& gA = t.grad(ai);
    for (std::size_t i = 0; i < G.size(); ++i) gA[i] += G[i] * Y[i] * (S(1) - Y[i]);
  });
}

template <class S>
Var<S> tanh(Var<S> a) {
  Matrix<S> C = a.value();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] = std::tanh(C[i]);
  return a.tape->record(std::move(C), {a}, [ai = a.id](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    const auto& Y = t.value(self);
    auto& gA = t.grad(ai);
    for (std::size_t i = 0; i < G.size(); ++i) gA[i] += G[i] * (S(1) - Y[i] * Y[i]);
  });
}

/// Clamps to [lo, hi]; the gradient is zero where the clamp is active.
template <class S>
Var<S> clamp(Var<S> a, S lo, S hi) {
  Matrix<S> C = a.value();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] = std::clamp(C[i], lo, hi);
  return a.tape->record(std::move(C), {a}, [ai = a.id, lo, hi](Tape<S>& t, std::size_t self) {
    if (!t.requires_grad(ai)) return;
    const auto& G = t.grad(self);
    const auto& A = t.value(ai);
    auto& gA = t.grad(ai);
    for (std::size_t i = 0; i < G.size(); ++i)
      if (A[i] >= lo && A[i] <= hi) gA[i] += G[i];
  });
}

template <class S>
Var<S> reshape(Var<S> a, std::size_t rows, std::size_t cols) {
  Matrix<S> C = a.value().reshaped(rows, cols);
  return a.tape->record(std::move(C), {a}, [ai = a.id](Tape<S>& t, std::size_t self) {
    detail::add_into(t, ai, t.grad(self));
  });
}

/// out[i] = a[idx[i]].
template <class S>
Var<S> gather_rows(Var<S> a, const Index& idx) {
  const auto& A = a.value();
  const std::size_t cols = A.cols();
  Matrix<S> C(idx->size(), cols);
  for (std::size_t i = 0; i < idx->size(); ++i) {
    const std::size_t src = (*idx)[i];
    if (src >= A.rows()) throw Error(ErrorKind::shape_mismatch, "gather_rows: index out of range");
    std::copy_n(A.data() + src * cols, cols, C.data() + i * cols);
  }
  return a.tape->record(std::move(C), {a}, [ai = a.id, idx, cols](Tape<S>& t, std::size_t self) {
    if (!t.requires_grad(ai)) return;
    const auto& G = t.grad(self);
    auto& gA = t.grad(ai);
    for (std::size_t i = 0; i < idx->size(); ++i) {
      S* dst = gA.data() + (*idx)[i] * cols;
      const S* src = G.data() + i * cols;
      for (std::size_t j = 0; j < cols; ++j) dst[j] += src[j];
    }
  });
}

/// out[s] = sum of a[i] over rows with seg[i] == s.
template <class S>
Var<S> segment_sum(Var<S> a, const Index& seg, std::size_t segments) {
  const auto& A = a.value();
  if (seg->size() != A.rows()) throw Error(ErrorKind::shape_mismatch, "segment_sum: segment ids size");
  const std::size_t cols = A.cols();
  std::vector<acc_t<S>> acc(segments * cols, acc_t<S>(0));
  for (std::size_t i = 0; i < A.rows(); ++i) {
    const std::size_t s = (*seg)[i];
    if (s >= segments) throw Error(ErrorKind::shape_mismatch, "segment_sum: segment id out of range");
    for (std::size_t j = 0; j < cols; ++j) acc[s * cols + j] += A(i, j);
  }
  Matrix<S> C(segments, cols);
  for (std::size_t i = 0; i < C.size(); ++i) C[i] = static_cast<S>(acc[i]);
  return a.tape->record(std::move(C), {a}, [ai = a.id, seg, cols](Tape<S>& t, std::size_t self) {
    if (!t.requires_grad(ai)) return;
    const auto& G = t.grad(self);
    auto& gA = t.grad(ai);
    for (std::size_t i = 0; i < seg->size(); ++i) {
      const S* src = G.data() + (*seg)[i] * cols;
      S* dst = gA.data() + i * cols;
      for (std::size_t j = 0; j < cols; ++j) dst[j] += src[j];
    }
  });
}

/// Row-wise mean over segments; empty segments yield zero rows.
template <class S>
Var<S> segment_mean(Var<S> a, const Index& seg, std::size_t segments) {
  const auto& A = a.value();
  if (seg->size() != A.rows()) throw Error(ErrorKind::shape_mismatch, "segment_mean: segment ids size");
  std::vector<std::size_t> counts(segments, 0);
  for (std::size_t s : *seg) {
    if (s >= segments) throw Error(ErrorKind::shape_mismatch, "segment_mean: segment id out of range");
    ++counts[s];
  }
  const std::size_t cols = A.cols();
  std::vector<acc_t<S>> acc(segments * cols, acc_t<S>(0));
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < cols; ++j) acc[(*seg)[i] * cols + j] += A(i, j);
  Matrix<S> C(segments, cols);
  for (std::size_t s = 0; s < segments; ++s)
    for (std::size_t j = 0; j < cols; ++j)
      C(s, j) = counts[s] == 0 ? S(0) : static_cast<S>(acc[s * cols + j] / acc_t<S>(counts[s]));
  return a.tape->record(std::move(C), {a}, [ai = a.id, seg, cols, counts](Tape<S>& t, std::size_t self) {
    if (!t.requires_grad(ai)) return;
    const auto& G = t.grad(self);
    auto& gA = t.grad(ai);
    for (std::size_t i = 0; i < seg->size(); ++i) {
      const std::size_t s = (*seg)[i];
      const S inv = S(1) / static_cast<S>(counts[s]);
      for (std::size_t j = 0; j < cols; ++j) gA(i, j) += G(s, j) * inv;
    }
  });
}

/// Per-head row dot products: out[i, h] = <a[i, block h], b[i, block h]>.
template <class S>
Var<S> rowdot_heads(Var<S> a, Var<S> b, std::size_t heads = 1) {
  detail::require_same(a.value(), b.value(), "rowdot_heads");
  const auto& A = a.value();
  const auto& B = b.value();
  if (heads == 0 || A.cols() % heads != 0) throw Error(ErrorKind::shape_mismatch, "rowdot_heads: head split");
  const std::size_t width = A.cols() / heads;
  Matrix<S> C(A.rows(), heads);
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t h = 0; h < heads; ++h) {
      S acc = 0;
      for (std::size_t j = h * width; j < (h + 1) * width; ++j) acc += A(i, j) * B(i, j);
      C(i, h) = acc;
    }
  return a.tape->record(std::move(C), {a, b}, [ai = a.id, bi = b.id, heads, width](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    const auto& A = t.value(ai);
    const auto& B = t.value(bi);
    if (t.requires_grad(ai)) {
      auto& gA = t.grad(ai);
      for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t h = 0; h < heads; ++h)
          for (std::size_t j = h * width; j < (h + 1) * width; ++j) gA(i, j) += G(i, h) * B(i, j);
    }
    if (t.requires_grad(bi)) {
      auto& gB = t.grad(bi);
      for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t h = 0; h < heads; ++h)
          for (std::size_t j = h * width; j < (h + 1) * width; ++j) gB(i, j) += G(i, h) * A(i, j);
    }
  });
}

/// Scales each head block of v[i] by w[i, h]. w has one column per head.
template <class S>
Var<S> scale_heads(Var<S> v, Var<S> w) {
  const auto& V = v.value();
  const auto& W = w.value();
  if (W.rows() != V.rows() || W.cols() == 0 || V.cols() % W.cols() != 0) {
    throw Error(ErrorKind::shape_mismatch, "scale_heads: weight shape");
  }
  const std::size_t heads = W.cols();
  const std::size_t width = V.cols() / heads;
  Matrix<S> C = V;
  for (std::size_t i = 0; i < C.rows(); ++i)
    for (std::size_t j = 0; j < C.cols(); ++j) C(i, j) *= W(i, j / width);
  return v.tape->record(std::move(C), {v, w}, [vi = v.id, wi = w.id, width](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    const auto& V = t.value(vi);
    const auto& W = t.value(wi);
    if (t.requires_grad(vi)) {
      auto& gV = t.grad(vi);
      for (std::size_t i = 0; i < G.rows(); ++i)
        for (std::size_t j = 0; j < G.cols(); ++j) gV(i, j) += G(i, j) * W(i, j / width);
    }
    if (t.requires_grad(wi)) {
      auto& gW = t.grad(wi);
      for (std::size_t i = 0; i < G.rows(); ++i)
        for (std::size_t j = 0; j < G.cols(); ++j) gW(i, j / width) += G(i, j) * V(i, j);
    }
  });
}

/// Softmax of each column over the rows sharing a segment id.
template <class S>
Var<S> segment_softmax(Var<S> a, const Index& seg, std::size_t segments) {
  const auto& A = a.value();
  if (seg->size() != A.rows()) throw Error(ErrorKind::shape_mismatch, "segment_softmax: segment ids size");
  const std::size_t cols = A.cols();
  std::vector<S> maxima(segments * cols, -std::numeric_limits<S>::infinity());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      S& m = maxima[(*seg)[i] * cols + j];
      m = std::max(m, A(i, j));
    }
  Matrix<S> C(A.rows(), cols);
  std::vector<acc_t<S>> sums(segments * cols, acc_t<S>(0));
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t k = (*seg)[i] * cols + j;
      C(i, j) = std::exp(A(i, j) - maxima[k]);
      sums[k] += C(i, j);
    }
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < cols; ++j)
      C(i, j) = static_cast<S>(acc_t<S>(C(i, j)) / sums[(*seg)[i] * cols + j]);
  return a.tape->record(std::move(C), {a}, [ai = a.id, seg, segments, cols](Tape<S>& t, std::size_t self) {
    if (!t.requires_grad(ai)) return;
    const auto& G = t.grad(self);
    const auto& Y = t.value(self);
    std::vector<acc_t<S>> dots(segments * cols, acc_t<S>(0));
    for (std::size_t i = 0; i < Y.rows(); ++i)
      for (std::size_t j = 0; j < cols; ++j) dots[(*seg)[i] * cols + j] += G(i, j) * Y(i, j);
    auto& gA = t.grad(ai);
    for (std::size_t i = 0; i < Y.rows(); ++i)
      for (std::size_t j = 0; j < cols; ++j)
        gA(i, j) += Y(i, j) * (G(i, j) - static_cast<S>(dots[(*seg)[i] * cols + j]));
  });
}

template <class S>
Var<S> concat_rows(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw Error(ErrorKind::shape_mismatch, "concat_rows: no operands");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw Error(ErrorKind::shape_mismatch, "concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix<S> C(rows, cols);
  std::vector<std::size_t> ids;
  std::vector<std::size_t> offsets;
  std::size_t at = 0;
  for (const auto& p : parts) {
    std::copy(p.value().storage().begin(), p.value().storage().end(), C.data() + at);
    ids.push_back(p.id);
    offsets.push_back(at);
    at += p.value().size();
  }
  return parts.front().tape->record(std::move(C), parts, [ids, offsets](Tape<S>& t, std::size_t self) {
    const auto& G = t.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.requires_grad(ids[k])) continue;
      auto& g = t.grad(ids[k]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += G[offsets[k] + i];
    }
  });
}

template <class S>
Var<S> slice_rows(Var<S> a, std::size_t begin, std::size_t count) {
  const auto& A = a.value();
  if (begin + count > A.rows()) throw Error(ErrorKind::shape_mismatch, "slice_rows: out of range");
  const std::size_t cols = A.cols();
  Matrix<S> C(count, cols);
  std::copy_n(A.data() + begin * cols, count * cols, C.data());
  return a.tape->record(std::move(C), {a}, [ai = a.id, begin, cols](Tape<S>& t, std::size_t self) {
    if (!t.requires_grad(ai)) return;
    const auto& G = t.grad(self);
    auto& gA = t.grad(ai);
    for (std::size_t i = 0; i < G.size(); ++i) gA[begin * cols + i] += G[i];
  });
}

/// Sum of all entries, as a 1x1 value.
template <class S>
Var<S> sum(Var<S> a) {
  acc_t<S> acc = 0;
  for (S v : a.value().storage()) acc += v;
  Matrix<S> C(1, 1, static_cast<S>(acc));
  return a.tape->record(std::move(C), {a}, [ai = a.id](Tape<S>& t, std::size_t self) {
    if (!t.requires_grad(ai)) return;
    const S g = t.grad(self)[0];
    auto& gA = t.grad(ai);
    for (std::size_t i = 0; i < gA.size(); ++i) gA[i] += g;
  });
}

/// Frobenius norm over all entries (1x1). Gradient at the origin is taken as zero.
template <class S>
Var<S> frobenius_norm(Var<S> a) {
  acc_t<S> acc = 0;
  for (S v : a.value().storage()) acc += acc_t<S>(v) * acc_t<S>(v);
  Matrix<S> C(1, 1, static_cast<S>(std::sqrt(acc)));
  return a.tape->record(std::move(C), {a}, [ai = a.id](Tape<S>& t, std::size_t self) {
    if (!t.requires_grad(ai)) return;
    const S norm = t.value(self)[0];
    if (norm == S(0)) return;
    const S g = t.grad(self)[0] / norm;
    const auto& A = t.value(ai);
    auto& gA = t.grad(ai);
    for (std::size_t i = 0; i < gA.size(); ++i) gA[i] += g * A[i];
  });
}

/// Euclidean norm of each row, shape [rows, 1].
template <class S>
Var<S> row_norms(Var<S> a) {
  const auto& A = a.value();
  Matrix<S> C(A.rows(), 1);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    acc_t<S> acc = 0;
    for (S v : A.row(i)) acc += acc_t<S>(v) * acc_t<S>(v);
    C(i, 0) = static_cast<S>(std::sqrt(acc));
  }
  return a.tape->record(std::move(C), {a}, [ai = a.id](Tape<S>& t, std::size_t self) {
    if (!t.requires_grad(ai)) return;
    const auto& G = t.grad(self);
    const auto& N = t.value(self);
    const auto& A = t.value(ai);
    auto& gA = t.grad(ai);
    for (std::size_t i = 0; i < A.rows(); ++i) {
      if (N(i, 0) == S(0)) continue;
      const S g = G(i, 0) / N(i, 0);
      for (std::size_t j = 0; j < A.cols(); ++j) gA(i, j) += g * A(i, j);
    }
  });
}

/// Weighted sum of 1x1 values: sum_k w_k * x_k.
template <class S>
Var<S> weighted_sum(const std::vector<Var<S>>& xs, const std::vector<S>& weights) {
  if (xs.size() != weights.size() || xs.empty()) throw Error(ErrorKind::shape_mismatch, "weighted_sum: arity");
  acc_t<S> acc = 0;
  std::vector<std::size_t> ids;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (xs[k].value().size() != 1) throw Error(ErrorKind::shape_mismatch, "weighted_sum: non-scalar operand");
    acc += acc_t<S>(weights[k]) * acc_t<S>(xs[k].value()[0]);
    ids.push_back(xs[k].id);
  }
  Matrix<S> C(1, 1, static_cast<S>(acc));
  return xs.front().tape->record(std::move(C), xs, [ids, weights](Tape<S>& t, std::size_t self) {
    const S g = t.grad(self)[0];
    for (std::size_t k = 0; k < ids.size(); ++k)
      if (t.requires_grad(ids[k])) t.grad(ids[k])[0] += weights[k] * g;
  });
}

/// x W + b for a [rows, in] input and parameters W [in, out], b [1, out].
template <class S>
Var<S> linear(Var<S> x, Var<S> w, Var<S> b) {
  return add_row(matmul(x, w), b);
}

}  // namespace ad
}  // namespace unitygraph
