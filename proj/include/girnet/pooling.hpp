#pragma once

// Pooling and gating primitives used by the attention blocks. Broadcasting
// is deliberately absent from the elementwise layer, so gate multiplication
// gets dedicated ops with hand-written backward rules.

#include <limits>

#include "girnet/autodiff.hpp"
#include "girnet/tensor.hpp"

namespace girnet {

namespace detail {

template <typename T>
const Tensor<T>& require_rank4(Tape<T>& t, const Var<T>& v, const char* who) {
  const Tensor<T>& x = t.value(v.id);
  if (x.rank() != 4)
    throw std::invalid_argument(std::string(who) + ": expected rank-4 input, got " +
                                shape_str(x.shape()));
  return x;
}

}  // namespace detail

// (N,C,H,W) -> (N,C,1,1), spatial mean per channel.
template <typename T>
Var<T> global_avg_pool(Var<T> a) {
  Tape<T>& t = *a.tape;
  const Tensor<T>& x = detail::require_rank4(t, a, "global_avg_pool");
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> out({n, c, 1, 1});
  for (int i = 0; i < n * c; ++i) {
    const T* src = x.data() + static_cast<std::size_t>(i) * plane;
    double acc = 0;
    for (std::size_t j = 0; j < plane; ++j) acc += static_cast<double>(src[j]);
    out[i] = static_cast<T>(acc / static_cast<double>(plane));
  }
  return t.make_node("global_avg_pool", std::move(out), {a.id}, [](Tape<T>& tp, int id) {
    const Tensor<T>& g = tp.out_grad(id);
    int ia = tp.inputs(id)[0];
    if (!tp.requires_grad(ia)) return;
    Tensor<T>& gx = tp.grad_buffer(ia);
    const std::size_t plane = static_cast<std::size_t>(gx.dim(2)) * gx.dim(3);
    const T inv = T(1) / static_cast<T>(plane);
    for (int i = 0; i < gx.dim(0) * gx.dim(1); ++i) {
      T* dst = gx.data() + static_cast<std::size_t>(i) * plane;
      const T gv = g[i] * inv;
      for (std::size_t j = 0; j < plane; ++j) dst[j] += gv;
    }
  });
}

// (N,C,H,W) -> (N,C,1,1), spatial max per channel. Gradient flows to the
// first maximal element in scan order.
template <typename T>
Var<T> global_max_pool(Var<T> a) {
  Tape<T>& t = *a.tape;
  const Tensor<T>& x = detail::require_rank4(t, a, "global_max_pool");
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> out({n, c, 1, 1});
  std::vector<std::size_t> arg(static_cast<std::size_t>(n) * c);
  for (int i = 0; i < n * c; ++i) {
    const T* src = x.data() + static_cast<std::size_t>(i) * plane;
    std::size_t best = 0;
    for (std::size_t j = 1; j < plane; ++j)
      if (src[j] > src[best]) best = j;
    arg[i] = best;
    out[i] = src[best];
  }
  return t.make_node("global_max_pool", std::move(out), {a.id},
                     [arg = std::move(arg)](Tape<T>& tp, int id) {
                       const Tensor<T>& g = tp.out_grad(id);
                       int ia = tp.inputs(id)[0];
                       if (!tp.requires_grad(ia)) return;
                       Tensor<T>& gx = tp.grad_buffer(ia);
                       const std::size_t plane =
                           static_cast<std::size_t>(gx.dim(2)) * gx.dim(3);
                       for (std::size_t i = 0; i < arg.size(); ++i)
                         gx[i * plane + arg[i]] += g[i];
                     });
}

// Weighted spatial pooling with a fixed (non-learnable) weight map:
// out(n,c) = sum_ij x(n,c,i,j) * wmap(i,j). Backs the frequency-projection
// channel attention, where wmap is a sum of cosine basis functions.
template <typename T>
Var<T> weighted_global_pool(Var<T> a, const Tensor<T>& wmap) {
  Tape<T>& t = *a.tape;
  const Tensor<T>& x = detail::require_rank4(t, a, "weighted_global_pool");
  if (wmap.rank() != 2 || wmap.dim(0) != x.dim(2) || wmap.dim(1) != x.dim(3))
    throw std::invalid_argument("weighted_global_pool: weight map " + shape_str(wmap.shape()) +
                                " does not match input " + shape_str(x.shape()));
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> out({n, c, 1, 1});
  for (int i = 0; i < n * c; ++i) {
    const T* src = x.data() + static_cast<std::size_t>(i) * plane;
    double acc = 0;
    for (std::size_t j = 0; j < plane; ++j)
      acc += static_cast<double>(src[j]) * static_cast<double>(wmap[j]);
    out[i] = static_cast<T>(acc);
  }
  return t.make_node("weighted_global_pool", std::move(out), {a.id},
                     [wmap](Tape<T>& tp, int id) {
                       const Tensor<T>& g = tp.out_grad(id);
                       int ia = tp.inputs(id)[0];
                       if (!tp.requires_grad(ia)) return;
                       Tensor<T>& gx = tp.grad_buffer(ia);
                       const std::size_t plane =
                           static_cast<std::size_t>(gx.dim(2)) * gx.dim(3);
                       for (int i = 0; i < gx.dim(0) * gx.dim(1); ++i) {
                         T* dst = gx.data() + static_cast<std::size_t>(i) * plane;
                         const T gv = g[i];
                         for (std::size_t j = 0; j < plane; ++j) dst[j] += gv * wmap[j];
                       }
                     });
}

// (N,C,H,W) -> (N,1,H,W), mean over channels per pixel.
template <typename T>
Var<T> channel_mean(Var<T> a) {
  Tape<T>& t = *a.tape;
  const Tensor<T>& x = detail::require_rank4(t, a, "channel_mean");
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> out({n, 1, x.dim(2), x.dim(3)});
  const T inv = T(1) / static_cast<T>(c);
  for (int b = 0; b < n; ++b) {
    const T* src = x.data() + static_cast<std::size_t>(b) * c * plane;
    T* dst = out.data() + static_cast<std::size_t>(b) * plane;
    for (std::size_t j = 0; j < plane; ++j) {
      T acc = T(0);
      for (int ci = 0; ci < c; ++ci) acc += src[static_cast<std::size_t>(ci) * plane + j];
      dst[j] = acc * inv;
    }
  }
  return t.make_node("channel_mean", std::move(out), {a.id}, [](Tape<T>& tp, int id) {
    const Tensor<T>& g = tp.out_grad(id);
    int ia = tp.inputs(id)[0];
    if (!tp.requires_grad(ia)) return;
    Tensor<T>& gx = tp.grad_buffer(ia);
    const int n = gx.dim(0), c = gx.dim(1);
    const std::size_t plane = static_cast<std::size_t>(gx.dim(2)) * gx.dim(3);
    const T inv = T(1) / static_cast<T>(c);
    for (int b = 0; b < n; ++b) {
      const T* gsrc = g.data() + static_cast<std::size_t>(b) * plane;
      T* dst = gx.data() + static_cast<std::size_t>(b) * c * plane;
      for (int ci = 0; ci < c; ++ci)
        for (std::size_t j = 0; j < plane; ++j)
          dst[static_cast<std::size_t>(ci) * plane + j] += gsrc[j] * inv;
    }
  });
}

// (N,C,H,W) -> (N,1,H,W), max over channels per pixel; gradient to the first
// maximal channel.
template <typename T>
Var<T> channel_max(Var<T> a) {
  Tape<T>& t = *a.tape;
  const Tensor<T>& x = detail::require_rank4(t, a, "channel_max");
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> out({n, 1, x.dim(2), x.dim(3)});
  std::vector<int> arg(static_cast<std::size_t>(n) * plane);
  for (int b = 0; b < n; ++b) {
    const T* src = x.data() + static_cast<std::size_t>(b) * c * plane;
    T* dst = out.data() + static_cast<std::size_t>(b) * plane;
    int* abase = arg.data() + static_cast<std::size_t>(b) * plane;
    for (std::size_t j = 0; j < plane; ++j) {
      int best = 0;
      T bv = src[j];
      for (int ci = 1; ci < c; ++ci) {
        const T v = src[static_cast<std::size_t>(ci) * plane + j];
        if (v > bv) {
          bv = v;
          best = ci;
        }
      }
      dst[j] = bv;
      abase[j] = best;
    }
  }
  return t.make_node("channel_max", std::move(out), {a.id},
                     [arg = std::move(arg)](Tape<T>& tp, int id) {
                       const Tensor<T>& g = tp.out_grad(id);
                       int ia = tp.inputs(id)[0];
                       if (!tp.requires_grad(ia)) return;
                       Tensor<T>& gx = tp.grad_buffer(ia);
                       const int n = gx.dim(0), c = gx.dim(1);
                       const std::size_t plane =
                           static_cast<std::size_t>(gx.dim(2)) * gx.dim(3);
                       for (int b = 0; b < n; ++b) {
                         const T* gsrc = g.data() + static_cast<std::size_t>(b) * plane;
                         T* dst = gx.data() + static_cast<std::size_t>(b) * c * plane;
                         const int* abase = arg.data() + static_cast<std::size_t>(b) * plane;
                         for (std::size_t j = 0; j < plane; ++j)
                           dst[static_cast<std::size_t>(abase[j]) * plane + j] += gsrc[j];
                       }
                     });
}

// x (N,C,H,W) * gate (N,C,1,1), broadcast over the spatial plane.
template <typename T>
Var<T> mul_channel_gate(Var<T> a, Var<T> gate) {
  detail::check_same_tape(a, gate, "mul_channel_gate");
  Tape<T>& t = *a.tape;
  const Tensor<T>& x = detail::require_rank4(t, a, "mul_channel_gate");
  const Tensor<T>& gv = t.value(gate.id);
  if (gv.rank() != 4 || gv.dim(0) != x.dim(0) || gv.dim(1) != x.dim(1) || gv.dim(2) != 1 ||
      gv.dim(3) != 1)
    throw std::invalid_argument("mul_channel_gate: gate " + shape_str(gv.shape()) +
                                " does not match input " + shape_str(x.shape()));
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> out = x;
  for (int i = 0; i < x.dim(0) * x.dim(1); ++i) {
    T* dst = out.data() + static_cast<std::size_t>(i) * plane;
    const T s = gv[i];
    for (std::size_t j = 0; j < plane; ++j) dst[j] *= s;
  }
  return t.make_node("mul_channel_gate", std::move(out), {a.id, gate.id},
                     [](Tape<T>& tp, int id) {
                       const Tensor<T>& g = tp.out_grad(id);
                       int ia = tp.inputs(id)[0], ig = tp.inputs(id)[1];
                       const Tensor<T>& x = tp.value(ia);
                       const Tensor<T>& gv = tp.value(ig);
                       const std::size_t plane =
                           static_cast<std::size_t>(x.dim(2)) * x.dim(3);
                       if (tp.requires_grad(ia)) {
                         Tensor<T>& gx = tp.grad_buffer(ia);
                         for (int i = 0; i < x.dim(0) * x.dim(1); ++i) {
                           const T* gsrc = g.data() + static_cast<std::size_t>(i) * plane;
                           T* dst = gx.data() + static_cast<std::size_t>(i) * plane;
                           const T s = gv[i];
                           for (std::size_t j = 0; j < plane; ++j) dst[j] += gsrc[j] * s;
                         }
                       }
                       if (tp.requires_grad(ig)) {
                         Tensor<T>& gg = tp.grad_buffer(ig);
                         for (int i = 0; i < x.dim(0) * x.dim(1); ++i) {
                           const T* gsrc = g.data() + static_cast<std::size_t>(i) * plane;
                           const T* xsrc = x.data() + static_cast<std::size_t>(i) * plane;
                           double acc = 0;
                           for (std::size_t j = 0; j < plane; ++j)
                             acc += static_cast<double>(gsrc[j]) * static_cast<double>(xsrc[j]);
                           gg[i] += static_cast<T>(acc);
                         }
                       }
                     });
}

// x (N,C,H,W) * gate (N,1,H,W), broadcast over channels.
template <typename T>
Var<T> mul_spatial_gate(Var<T> a, Var<T> gate) {
  detail::check_same_tape(a, gate, "mul_spatial_gate");
  Tape<T>& t = *a.tape;
  const Tensor<T>& x = detail::require_rank4(t, a, "mul_spatial_gate");
  const Tensor<T>& gv = t.value(gate.id);
  if (gv.rank() != 4 || gv.dim(0) != x.dim(0) || gv.dim(1) != 1 || gv.dim(2) != x.dim(2) ||
      gv.dim(3) != x.dim(3))
    throw std::invalid_argument("mul_spatial_gate: gate " + shape_str(gv.shape()) +
                                " does not match input " + shape_str(x.shape()));
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> out = x;
  for (int b = 0; b < n; ++b) {
    const T* gsrc = gv.data() + static_cast<std::size_t>(b) * plane;
    T* dst = out.data() + static_cast<std::size_t>(b) * c * plane;
    for (int ci = 0; ci < c; ++ci)
      for (std::size_t j = 0; j < plane; ++j) dst[static_cast<std::size_t>(ci) * plane + j] *= gsrc[j];
  }
  return t.make_node("mul_spatial_gate", std::move(out), {a.id, gate.id},
                     [](Tape<T>& tp, int id) {
                       const Tensor<T>& g = tp.out_grad(id);
                       int ia = tp.inputs(id)[0], ig = tp.inputs(id)[1];
                       const Tensor<T>& x = tp.value(ia);
                       const Tensor<T>& gv = tp.value(ig);
                       const int n = x.dim(0), c = x.dim(1);
                       const std::size_t plane =
                           static_cast<std::size_t>(x.dim(2)) * x.dim(3);
                       if (tp.requires_grad(ia)) {
                         Tensor<T>& gx = tp.grad_buffer(ia);
                         for (int b = 0; b < n; ++b) {
                           const T* gate_p = gv.data() + static_cast<std::size_t>(b) * plane;
                           const std::size_t base = static_cast<std::size_t>(b) * c * plane;
                           for (int ci = 0; ci < c; ++ci)
                             for (std::size_t j = 0; j < plane; ++j)
                               gx[base + ci * plane + j] += g[base + ci * plane + j] * gate_p[j];
                         }
                       }
                       if (tp.requires_grad(ig)) {
                         Tensor<T>& gg = tp.grad_buffer(ig);
                         for (int b = 0; b < n; ++b) {
                           T* gdst = gg.data() + static_cast<std::size_t>(b) * plane;
                           const std::size_t base = static_cast<std::size_t>(b) * c * plane;
                           for (int ci = 0; ci < c; ++ci)
                             for (std::size_t j = 0; j < plane; ++j)
                               gdst[j] += g[base + ci * plane + j] * x[base + ci * plane + j];
                         }
                       }
                     });
}

}  // namespace girnet
