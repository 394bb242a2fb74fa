#pragma once

// Two lightweight attention blocks for ResBlocks.
//
// attention-1 (channel + spatial): a channel gate from average- and
// max-pooled descriptors pushed through a shared bottleneck MLP, followed by
// a spatial gate from a 7x7 conv over per-pixel channel statistics.
//
// attention-2 (frequency channel): the channel descriptor is a sum of
// projections onto the n_freq lowest 2-D cosine basis functions instead of a
// plain average; the (0,0) basis term reproduces average pooling, higher
// terms add low-frequency structure. Same MLP, channel gate only.

#include <map>

#include "girnet/autodiff.hpp"
#include "girnet/conv.hpp"
#include "girnet/pooling.hpp"
#include "girnet/tensor.hpp"

namespace girnet {

enum class AttentionKind { none, channel_spatial, frequency };

constexpr int kAttentionReduction = 4;
constexpr int kAttentionFreqCount = 4;

inline AttentionKind parse_attention_kind(const std::string& s) {
  if (s == "none") return AttentionKind::none;
  if (s == "attention-1") return AttentionKind::channel_spatial;
  if (s == "attention-2") return AttentionKind::frequency;
  throw std::invalid_argument("unknown attention kind '" + s +
                              "' (expected none, attention-1 or attention-2)");
}

inline const char* attention_kind_name(AttentionKind k) {
  switch (k) {
    case AttentionKind::none: return "none";
    case AttentionKind::channel_spatial: return "attention-1";
    case AttentionKind::frequency: return "attention-2";
  }
  return "?";
}

// The n_freq lowest 2-D cosine basis functions on an h x w grid, stacked as
// (n_freq, h, w). Frequencies are ordered (0,0), (0,1), (1,0), (1,1), ...;
// each is normalized by h*w so the (0,0) function is exactly average pooling.
template <typename T>
Tensor<T> cosine_basis(int n_freq, int h, int w) {
  if (n_freq < 1 || h < 1 || w < 1)
    throw std::invalid_argument("cosine_basis: all extents must be >= 1");
  Tensor<T> basis({n_freq, h, w});
  const double norm = 1.0 / (static_cast<double>(h) * w);
  int f = 0;
  for (int diag = 0; f < n_freq; ++diag)
    for (int u = 0; u <= diag && f < n_freq; ++u, ++f) {
      const int v = diag - u;
      T* dst = basis.data() + static_cast<std::size_t>(f) * h * w;
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
          dst[static_cast<std::size_t>(i) * w + j] = static_cast<T>(
              norm * std::cos(M_PI * (i + 0.5) * u / h) * std::cos(M_PI * (j + 0.5) * v / w));
    }
  return basis;
}

namespace detail {

// Per-(h,w) cache of summed basis maps; the basis is a pure function of the
// spatial size, so entries are computed once and shared.
template <typename T>
const Tensor<T>& summed_basis(int n_freq, int h, int w) {
  thread_local std::map<std::tuple<int, int, int>, Tensor<T>> cache;
  auto key = std::make_tuple(n_freq, h, w);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  Tensor<T> basis = cosine_basis<T>(n_freq, h, w);
  Tensor<T> sum({h, w});
  for (int f = 0; f < n_freq; ++f)
    for (std::size_t j = 0; j < sum.numel(); ++j)
      sum[j] += basis[static_cast<std::size_t>(f) * sum.numel() + j];
  return cache.emplace(key, std::move(sum)).first->second;
}

}  // namespace detail

template <typename T>
struct AttentionRef {
  AttentionKind kind = AttentionKind::none;
  int n_freq = kAttentionFreqCount;
  ConvRef<T> mlp1, mlp2;  // 1x1 bottleneck: C -> C/r -> C
  ConvRef<T> spatial;     // 7x7, 2 -> 1 channels (attention-1 only)
};

namespace detail {

template <typename T>
Var<T> attention_mlp(Var<T> z, const AttentionRef<T>& p) {
  return conv2d(relu(conv2d(z, p.mlp1)), p.mlp2);
}

}  // namespace detail

template <typename T>
Var<T> attention_apply(Var<T> x, const AttentionRef<T>& p) {
  if (p.kind == AttentionKind::none) return x;
  Tape<T>& t = *x.tape;
  const Tensor<T>& xv = t.value(x.id);
  if (xv.rank() != 4)
    throw std::invalid_argument("attention_apply: expected rank-4 input, got " +
                                shape_str(xv.shape()));
  if (t.value(p.mlp1.weight.id).dim(1) != xv.dim(1))
    throw std::invalid_argument("attention_apply: input channels " + shape_str(xv.shape()) +
                                " do not match MLP " +
                                shape_str(t.value(p.mlp1.weight.id).shape()));
  if (p.kind == AttentionKind::channel_spatial) {
    Var<T> gate = sigmoid(add(detail::attention_mlp(global_avg_pool(x), p),
                              detail::attention_mlp(global_max_pool(x), p)));
    Var<T> xc = mul_channel_gate(x, gate);
    Var<T> stats = concat_channels({channel_mean(xc), channel_max(xc)});
    Var<T> sgate = sigmoid(conv2d(stats, p.spatial));
    return mul_spatial_gate(xc, sgate);
  }
  const Tensor<T>& wmap = detail::summed_basis<T>(p.n_freq, xv.dim(2), xv.dim(3));
  Var<T> z = weighted_global_pool(x, wmap);
  Var<T> gate = sigmoid(detail::attention_mlp(z, p));
  return mul_channel_gate(x, gate);
}

// x + attention(conv2(relu(conv1(x)))): the standard two-conv residual block
// with the attention gate on the residual branch.
template <typename T>
Var<T> resblock(Var<T> x, const ConvRef<T>& conv1, const ConvRef<T>& conv2_,
                const AttentionRef<T>& att) {
  Var<T> y = conv2d(relu(conv2d(x, conv1)), conv2_);
  y = attention_apply(y, att);
  return add(x, y);
}

}  // namespace girnet
