#pragma once

// PixelShuffle: channel-to-space rearrangement for learned upsampling.
// out(n, c, r*i + a, r*j + b) = x(n, c*r^2 + a*r + b, i, j). A pure
// permutation of values, so backward is the inverse rearrangement.

#include "girnet/autodiff.hpp"
#include "girnet/tensor.hpp"

namespace girnet {

template <typename T>
Tensor<T> pixel_shuffle_forward(const Tensor<T>& x, int r) {
  if (x.rank() != 4)
    throw std::invalid_argument("pixel_shuffle: input must be rank 4, got " +
                                shape_str(x.shape()));
  if (r < 1) throw std::invalid_argument("pixel_shuffle: upscale factor must be >= 1");
  const int n = x.dim(0), c_in = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (c_in % (r * r) != 0)
    throw std::invalid_argument("pixel_shuffle: channels " + std::to_string(c_in) +
                                " not divisible by r^2 = " + std::to_string(r * r));
  const int c = c_in / (r * r);
  Tensor<T> out({n, c, r * h, r * w});
  for (int b = 0; b < n; ++b)
    for (int co = 0; co < c; ++co)
      for (int a = 0; a < r; ++a)
        for (int bb = 0; bb < r; ++bb) {
          const T* src = x.data() +
                         ((static_cast<std::size_t>(b) * c_in + co * r * r + a * r + bb) * h) * w;
          for (int i = 0; i < h; ++i) {
            T* dst = out.data() +
                     ((static_cast<std::size_t>(b) * c + co) * (r * h) + (r * i + a)) *
                         static_cast<std::size_t>(r * w) +
                     bb;
            const T* row = src + static_cast<std::size_t>(i) * w;
            for (int j = 0; j < w; ++j) dst[static_cast<std::size_t>(r) * j] = row[j];
          }
        }
  return out;
}

// Exact inverse of pixel_shuffle_forward.
template <typename T>
Tensor<T> pixel_unshuffle_forward(const Tensor<T>& y, int r) {
  if (y.rank() != 4)
    throw std::invalid_argument("pixel_unshuffle: input must be rank 4, got " +
                                shape_str(y.shape()));
  if (r < 1) throw std::invalid_argument("pixel_unshuffle: upscale factor must be >= 1");
  const int n = y.dim(0), c = y.dim(1), rh = y.dim(2), rw = y.dim(3);
  if (rh % r != 0 || rw % r != 0)
    throw std::invalid_argument("pixel_unshuffle: spatial dims " + shape_str(y.shape()) +
                                " not divisible by r = " + std::to_string(r));
  const int h = rh / r, w = rw / r;
  Tensor<T> out({n, c * r * r, h, w});
  for (int b = 0; b < n; ++b)
    for (int co = 0; co < c; ++co)
      for (int a = 0; a < r; ++a)
        for (int bb = 0; bb < r; ++bb) {
          T* dst = out.data() +
                   ((static_cast<std::size_t>(b) * c * r * r + co * r * r + a * r + bb) * h) * w;
          for (int i = 0; i < h; ++i) {
            const T* src = y.data() +
                           ((static_cast<std::size_t>(b) * c + co) * rh + (r * i + a)) *
                               static_cast<std::size_t>(rw) +
                           bb;
            T* row = dst + static_cast<std::size_t>(i) * w;
            for (int j = 0; j < w; ++j) row[j] = src[static_cast<std::size_t>(r) * j];
          }
        }
  return out;
}

template <typename T>
Var<T> pixel_shuffle(Var<T> x, int r) {
  Tape<T>& t = *x.tape;
  Tensor<T> out = pixel_shuffle_forward(t.value(x.id), r);
  return t.make_node("pixel_shuffle", std::move(out), {x.id}, [r](Tape<T>& tp, int id) {
    int ia = tp.inputs(id)[0];
    if (!tp.requires_grad(ia)) return;
    Tensor<T> gin = pixel_unshuffle_forward(tp.out_grad(id), r);
    detail::accumulate(tp.grad_buffer(ia), gin);
  });
}

}  // namespace girnet
