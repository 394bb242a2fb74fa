#pragma once

// Reverse-mode automatic differentiation on an arena tape.
//
// A Tape<T> owns every node of one computation graph; Var<T> is a cheap
// (tape pointer, node id) handle. Node ids follow creation order, which is
// already a topological order, so the backward sweep is a single reverse
// walk. Backward closures capture node ids and plain values only and fetch
// tensors through the tape at call time; the node vector may reallocate as
// the graph grows, so closures must never hold references into it.

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "girnet/tensor.hpp"

namespace girnet {

namespace detail {

// Optional monitor for how close a forward pass comes to a derivative
// discontinuity (relu corners, bilinear cell boundaries). Finite-difference
// checks arm it to reject base points whose neighborhood a central
// difference would straddle.
inline thread_local double* kink_watch = nullptr;

inline void watch_kink(double dist) {
  if (kink_watch && dist < *kink_watch) *kink_watch = dist;
}

}  // namespace detail

// Arms the kink monitor for the current scope; min_dist collects the
// smallest distance to any nondifferentiable point seen by forward passes.
struct KinkScope {
  double min_dist = std::numeric_limits<double>::infinity();
  double* prev;
  KinkScope() : prev(detail::kink_watch) { detail::kink_watch = &min_dist; }
  ~KinkScope() { detail::kink_watch = prev; }
  KinkScope(const KinkScope&) = delete;
  KinkScope& operator=(const KinkScope&) = delete;
};

template <typename T>
class Tape;

template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor<T>& value() const { return tape->value(id); }
  const Shape& shape() const { return tape->value(id).shape(); }
};

template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int)>;

  // Inserts a leaf holding `value`. Leaves with requires_grad participate in
  // reverse accumulation; constants never receive gradient buffers.
  Var<T> leaf(Tensor<T> value, bool requires_grad = true) {
    return push("leaf", std::move(value), {}, nullptr, requires_grad);
  }

  Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }

  // Inserts an interior node. `inputs` are ids on this tape; requires_grad
  // is inherited from the inputs, and `backward` is dropped when no input
  // needs gradients.
  Var<T> make_node(const char* op, Tensor<T> value, std::vector<int> inputs, BackwardFn backward) {
    bool req = false;
    for (int i : inputs) {
      check_id(i, op);
      if (nodes_[i].requires_grad) req = true;
    }
    return push(op, std::move(value), std::move(inputs), req ? std::move(backward) : nullptr, req);
  }

  int size() const { return static_cast<int>(nodes_.size()); }

  const Tensor<T>& value(int id) const {
    check_id(id, "value");
    return nodes_[id].value;
  }

  const std::vector<int>& inputs(int id) const {
    check_id(id, "inputs");
    return nodes_[id].inputs;
  }

  bool requires_grad(int id) const {
    check_id(id, "requires_grad");
    return nodes_[id].requires_grad;
  }

  bool has_grad(int id) const {
    check_id(id, "has_grad");
    return !nodes_[id].grad.empty();
  }

  // Gradient buffer of a node, zero-initialized on first access. Backward
  // functions accumulate into it with +=.
  Tensor<T>& grad_buffer(int id) {
    check_id(id, "grad_buffer");
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor<T>::zeros(n.value.shape());
    return n.grad;
  }

  // Upstream gradient of the node currently being processed. Only valid for
  // nodes that have received at least one contribution.
  const Tensor<T>& out_grad(int id) const {
    check_id(id, "out_grad");
    if (nodes_[id].grad.empty())
      throw std::runtime_error("out_grad: node " + std::to_string(id) + " has no gradient");
    return nodes_[id].grad;
  }

  // Copy of a leaf's accumulated gradient; zeros when the node never
  // received a contribution (e.g. a parameter unreachable from the loss).
  Tensor<T> grad(const Var<T>& v) const {
    check_var(v, "grad");
    const Node& n = nodes_[v.id];
    if (n.grad.empty()) return Tensor<T>::zeros(n.value.shape());
    return n.grad;
  }

  // Reverse sweep from a scalar loss. Gradients of interior nodes are
  // released as soon as they have been consumed; leaf gradients persist so
  // callers can read them afterwards.
  void backward(const Var<T>& loss) {
    check_var(loss, "backward");
    if (nodes_[loss.id].value.numel() != 1)
      throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                  shape_str(nodes_[loss.id].value.shape()));
    if (!nodes_[loss.id].requires_grad) return;
    grad_buffer(loss.id)[0] = T(1);
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.backward) {
        n.backward(*this, id);
        n.grad = Tensor<T>();
      }
    }
  }

 private:
  struct Node {
    const char* op;
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<int> inputs;
    BackwardFn backward;
    bool requires_grad;
  };

  Var<T> push(const char* op, Tensor<T> value, std::vector<int> inputs, BackwardFn backward,
              bool requires_grad) {
    if (value.empty()) throw std::invalid_argument(std::string(op) + ": empty tensor value");
    nodes_.push_back(Node{op, std::move(value), Tensor<T>(), std::move(inputs),
                          std::move(backward), requires_grad});
    return Var<T>{this, size() - 1};
  }

  void check_id(int id, const char* who) const {
    if (id < 0 || id >= size())
      throw std::invalid_argument(std::string(who) + ": bad node id " + std::to_string(id));
  }

  void check_var(const Var<T>& v, const char* who) const {
    if (v.tape != this) throw std::invalid_argument(std::string(who) + ": var from another tape");
    check_id(v.id, who);
  }

  std::vector<Node> nodes_;
};

namespace detail {

template <typename T>
void check_same_tape(const Var<T>& a, const Var<T>& b, const char* who) {
  if (a.tape == nullptr || a.tape != b.tape)
    throw std::invalid_argument(std::string(who) + ": vars must share one tape");
}

template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
  T* d = dst.data();
  const T* s = src.data();
  for (std::size_t i = 0; i < dst.numel(); ++i) d[i] += s[i];
}

}  // namespace detail

// ---- elementwise ops -------------------------------------------------------

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  detail::check_same_tape(a, b, "add");
  Tape<T>& t = *a.tape;
  check_same_shape(t.value(a.id), t.value(b.id), "add");
  Tensor<T> out = t.value(a.id);
  detail::accumulate(out, t.value(b.id));
  return t.make_node("add", std::move(out), {a.id, b.id}, [](Tape<T>& tp, int id) {
    const Tensor<T>& g = tp.out_grad(id);
    for (int in : tp.inputs(id))
      if (tp.requires_grad(in)) detail::accumulate(tp.grad_buffer(in), g);
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  detail::check_same_tape(a, b, "sub");
  Tape<T>& t = *a.tape;
  check_same_shape(t.value(a.id), t.value(b.id), "sub");
  Tensor<T> out = t.value(a.id);
  const Tensor<T>& bv = t.value(b.id);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
  return t.make_node("sub", std::move(out), {a.id, b.id}, [](Tape<T>& tp, int id) {
    const Tensor<T>& g = tp.out_grad(id);
    int ia = tp.inputs(id)[0], ib = tp.inputs(id)[1];
    if (tp.requires_grad(ia)) detail::accumulate(tp.grad_buffer(ia), g);
    if (tp.requires_grad(ib)) {
      Tensor<T>& gb = tp.grad_buffer(ib);
      for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] -= g[i];
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  detail::check_same_tape(a, b, "mul");
  Tape<T>& t = *a.tape;
  check_same_shape(t.value(a.id), t.value(b.id), "mul");
  Tensor<T> out = t.value(a.id);
  const Tensor<T>& bv = t.value(b.id);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
  return t.make_node("mul", std::move(out), {a.id, b.id}, [](Tape<T>& tp, int id) {
    const Tensor<T>& g = tp.out_grad(id);
    int ia = tp.inputs(id)[0], ib = tp.inputs(id)[1];
    if (tp.requires_grad(ia)) {
      Tensor<T>& ga = tp.grad_buffer(ia);
      const Tensor<T>& bval = tp.value(ib);
      for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g[i] * bval[i];
    }
    if (tp.requires_grad(ib)) {
      Tensor<T>& gb = tp.grad_buffer(ib);
      const Tensor<T>& aval = tp.value(ia);
      for (std::size_t i = 0; i < gb.numel(); ++i) gb[i] += g[i] * aval[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T c) {
  Tape<T>& t = *a.tape;
  Tensor<T> out = t.value(a.id);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= c;
  return t.make_node("scale", std::move(out), {a.id}, [c](Tape<T>& tp, int id) {
    const Tensor<T>& g = tp.out_grad(id);
    int ia = tp.inputs(id)[0];
    if (!tp.requires_grad(ia)) return;
    Tensor<T>& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g[i] * c;
  });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  Tape<T>& t = *a.tape;
  Tensor<T> out = t.value(a.id);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = T(1) / (T(1) + std::exp(-out[i]));
  return t.make_node("sigmoid", std::move(out), {a.id}, [](Tape<T>& tp, int id) {
    const Tensor<T>& g = tp.out_grad(id);
    const Tensor<T>& y = tp.value(id);
    int ia = tp.inputs(id)[0];
    if (!tp.requires_grad(ia)) return;
    Tensor<T>& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g[i] * y[i] * (T(1) - y[i]);
  });
}

template <typename T>
Var<T> tanh(Var<T> a) {
  Tape<T>& t = *a.tape;
  Tensor<T> out = t.value(a.id);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
  return t.make_node("tanh", std::move(out), {a.id}, [](Tape<T>& tp, int id) {
    const Tensor<T>& g = tp.out_grad(id);
    const Tensor<T>& y = tp.value(id);
    int ia = tp.inputs(id)[0];
    if (!tp.requires_grad(ia)) return;
    Tensor<T>& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g[i] * (T(1) - y[i] * y[i]);
  });
}

template <typename T>
Var<T> sin(Var<T> a) {
  Tape<T>& t = *a.tape;
  Tensor<T> out = t.value(a.id);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::sin(out[i]);
  return t.make_node("sin", std::move(out), {a.id}, [](Tape<T>& tp, int id) {
    const Tensor<T>& g = tp.out_grad(id);
    int ia = tp.inputs(id)[0];
    if (!tp.requires_grad(ia)) return;
    const Tensor<T>& x = tp.value(ia);
    Tensor<T>& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g[i] * std::cos(x[i]);
  });
}

template <typename T>
Var<T> relu(Var<T> a) {
  Tape<T>& t = *a.tape;
  Tensor<T> out = t.value(a.id);
  for (std::size_t i = 0; i < out.numel(); ++i) {
    detail::watch_kink(std::abs(static_cast<double>(out[i])));
    out[i] = out[i] > T(0) ? out[i] : T(0);
  }
  return t.make_node("relu", std::move(out), {a.id}, [](Tape<T>& tp, int id) {
    const Tensor<T>& g = tp.out_grad(id);
    int ia = tp.inputs(id)[0];
    if (!tp.requires_grad(ia)) return;
    const Tensor<T>& x = tp.value(ia);
    Tensor<T>& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.numel(); ++i)
      if (x[i] > T(0)) ga[i] += g[i];
  });
}

template <typename T>
Var<T> leaky_relu(Var<T> a, T slope = T(0.1)) {
  Tape<T>& t = *a.tape;
  Tensor<T> out = t.value(a.id);
  for (std::size_t i = 0; i < out.numel(); ++i) {
    detail::watch_kink(std::abs(static_cast<double>(out[i])));
    out[i] = out[i] > T(0) ? out[i] : slope * out[i];
  }
  return t.make_node("leaky_relu", std::move(out), {a.id}, [slope](Tape<T>& tp, int id) {
    const Tensor<T>& g = tp.out_grad(id);
    int ia = tp.inputs(id)[0];
    if (!tp.requires_grad(ia)) return;
    const Tensor<T>& x = tp.value(ia);
    Tensor<T>& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g[i] * (x[i] > T(0) ? T(1) : slope);
  });
}

// Sum of all elements, returned as a shape-(1,) scalar.
template <typename T>
Var<T> sum(Var<T> a) {
  Tape<T>& t = *a.tape;
  double acc = 0;
  const Tensor<T>& x = t.value(a.id);
  for (std::size_t i = 0; i < x.numel(); ++i) acc += static_cast<double>(x[i]);
  Tensor<T> out({1}, {static_cast<T>(acc)});
  return t.make_node("sum", std::move(out), {a.id}, [](Tape<T>& tp, int id) {
    const T g = tp.out_grad(id)[0];
    int ia = tp.inputs(id)[0];
    if (!tp.requires_grad(ia)) return;
    Tensor<T>& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g;
  });
}

template <typename T>
Var<T> operator+(Var<T> a, Var<T> b) { return add(a, b); }
template <typename T>
Var<T> operator-(Var<T> a, Var<T> b) { return sub(a, b); }
template <typename T>
Var<T> operator*(Var<T> a, Var<T> b) { return mul(a, b); }

// ---- channel concat / slice (NCHW) ----------------------------------------

template <typename T>
Var<T> concat_channels(std::span<const Var<T>> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  Tape<T>& t = *parts[0].tape;
  const Tensor<T>& first = t.value(parts[0].id);
  if (first.rank() != 4)
    throw std::invalid_argument("concat_channels: expected rank-4 inputs, got " +
                                shape_str(first.shape()));
  const int n = first.dim(0), h = first.dim(2), w = first.dim(3);
  int c_total = 0;
  std::vector<int> ids;
  for (const Var<T>& p : parts) {
    detail::check_same_tape(parts[0], p, "concat_channels");
    const Tensor<T>& v = t.value(p.id);
    if (v.rank() != 4 || v.dim(0) != n || v.dim(2) != h || v.dim(3) != w)
      throw std::invalid_argument("concat_channels: incompatible shapes " +
                                  shape_str(first.shape()) + " vs " + shape_str(v.shape()));
    c_total += v.dim(1);
    ids.push_back(p.id);
  }
  Tensor<T> out({n, c_total, h, w});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int b = 0; b < n; ++b) {
    std::size_t dst_c = 0;
    for (const Var<T>& p : parts) {
      const Tensor<T>& v = t.value(p.id);
      const int c = v.dim(1);
      const T* src = v.data() + static_cast<std::size_t>(b) * c * plane;
      T* dst = out.data() + (static_cast<std::size_t>(b) * c_total + dst_c) * plane;
      std::copy(src, src + static_cast<std::size_t>(c) * plane, dst);
      dst_c += c;
    }
  }
  return t.make_node("concat_channels", std::move(out), std::move(ids), [](Tape<T>& tp, int id) {
    const Tensor<T>& g = tp.out_grad(id);
    const std::vector<int>& ins = tp.inputs(id);
    const int n = g.dim(0), c_total = g.dim(1);
    const std::size_t plane = static_cast<std::size_t>(g.dim(2)) * g.dim(3);
    int c_off = 0;
    for (int in : ins) {
      const int c = tp.value(in).dim(1);
      if (tp.requires_grad(in)) {
        Tensor<T>& gi = tp.grad_buffer(in);
        for (int b = 0; b < n; ++b) {
          const T* src = g.data() + (static_cast<std::size_t>(b) * c_total + c_off) * plane;
          T* dst = gi.data() + static_cast<std::size_t>(b) * c * plane;
          for (std::size_t i = 0; i < static_cast<std::size_t>(c) * plane; ++i) dst[i] += src[i];
        }
      }
      c_off += c;
    }
  });
}

template <typename T>
Var<T> concat_channels(std::initializer_list<Var<T>> parts) {
  return concat_channels(std::span<const Var<T>>(parts.begin(), parts.size()));
}

// Channel slice [begin, end) of an NCHW tensor.
template <typename T>
Var<T> slice_channels(Var<T> a, int begin, int end) {
  Tape<T>& t = *a.tape;
  const Tensor<T>& x = t.value(a.id);
  if (x.rank() != 4)
    throw std::invalid_argument("slice_channels: expected rank-4 input, got " +
                                shape_str(x.shape()));
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (begin < 0 || end > c || begin >= end)
    throw std::invalid_argument("slice_channels: bad range [" + std::to_string(begin) + "," +
                                std::to_string(end) + ") for " + std::to_string(c) + " channels");
  const int cs = end - begin;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor<T> out({n, cs, h, w});
  for (int b = 0; b < n; ++b) {
    const T* src = x.data() + (static_cast<std::size_t>(b) * c + begin) * plane;
    T* dst = out.data() + static_cast<std::size_t>(b) * cs * plane;
    std::copy(src, src + static_cast<std::size_t>(cs) * plane, dst);
  }
  return t.make_node("slice_channels", std::move(out), {a.id},
                     [begin, cs](Tape<T>& tp, int id) {
                       const Tensor<T>& g = tp.out_grad(id);
                       int ia = tp.inputs(id)[0];
                       if (!tp.requires_grad(ia)) return;
                       Tensor<T>& gi = tp.grad_buffer(ia);
                       const int n = gi.dim(0), c = gi.dim(1);
                       const std::size_t plane =
                           static_cast<std::size_t>(gi.dim(2)) * gi.dim(3);
                       for (int b = 0; b < n; ++b) {
                         const T* src = g.data() + static_cast<std::size_t>(b) * cs * plane;
                         T* dst = gi.data() + (static_cast<std::size_t>(b) * c + begin) * plane;
                         for (std::size_t i = 0; i < static_cast<std::size_t>(cs) * plane; ++i)
                           dst[i] += src[i];
                       }
                     });
}

// ---- gradient extraction ---------------------------------------------------

// Runs the reverse sweep from `loss` and returns one gradient tensor per
// named parameter. Parameters the loss never touched come back as zeros.
template <typename T>
std::map<std::string, Tensor<T>> reverse_accumulate(const Var<T>& loss,
                                                    const std::map<std::string, Var<T>>& params) {
  for (const auto& [name, v] : params)
    if (v.tape != loss.tape)
      throw std::invalid_argument("reverse_accumulate: parameter '" + name +
                                  "' lives on a different tape");
  loss.tape->backward(loss);
  std::map<std::string, Tensor<T>> grads;
  for (const auto& [name, v] : params) grads.emplace(name, loss.tape->grad(v));
  return grads;
}

}  // namespace girnet
