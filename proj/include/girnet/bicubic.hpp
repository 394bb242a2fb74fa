#pragma once

// Separable bicubic resampling with the Catmull-Rom family kernel (a = -0.5),
// edge-clamped taps and half-pixel center alignment:
// src = (dst + 0.5) * (in / out) - 0.5. Cubic kernels can overshoot [0,1] by
// a few percent on high-contrast data; callers clamp afterwards.

#include <cmath>
#include <vector>

#include "girnet/tensor.hpp"

namespace girnet {

namespace detail {

inline double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t < 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

struct ResampleTap {
  int idx[4];
  double w[4];
};

inline std::vector<ResampleTap> cubic_taps(int in, int out) {
  std::vector<ResampleTap> taps(out);
  const double ratio = static_cast<double>(in) / out;
  for (int d = 0; d < out; ++d) {
    const double src = (d + 0.5) * ratio - 0.5;
    const int base = static_cast<int>(std::floor(src));
    const double t = src - base;
    for (int k = 0; k < 4; ++k) {
      const int raw = base - 1 + k;
      taps[d].idx[k] = raw < 0 ? 0 : (raw >= in ? in - 1 : raw);
      taps[d].w[k] = cubic_weight(t - (k - 1));
    }
  }
  return taps;
}

}  // namespace detail

template <typename T>
Tensor<T> bicubic_resize(const Tensor<T>& img, int out_h, int out_w) {
  if (img.rank() != 3)
    throw std::invalid_argument("bicubic_resize: expected (C,H,W), got " + shape_str(img.shape()));
  if (out_h < 1 || out_w < 1)
    throw std::invalid_argument("bicubic_resize: output extents must be >= 1");
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  const std::vector<detail::ResampleTap> tx = detail::cubic_taps(w, out_w);
  const std::vector<detail::ResampleTap> ty = detail::cubic_taps(h, out_h);

  // Horizontal pass in double, then vertical.
  std::vector<double> mid(static_cast<std::size_t>(c) * h * out_w);
  for (int ci = 0; ci < c; ++ci) {
    const T* src = img.data() + static_cast<std::size_t>(ci) * h * w;
    double* dst = mid.data() + static_cast<std::size_t>(ci) * h * out_w;
    for (int i = 0; i < h; ++i) {
      const T* row = src + static_cast<std::size_t>(i) * w;
      double* orow = dst + static_cast<std::size_t>(i) * out_w;
      for (int j = 0; j < out_w; ++j) {
        const detail::ResampleTap& tap = tx[j];
        orow[j] = tap.w[0] * row[tap.idx[0]] + tap.w[1] * row[tap.idx[1]] +
                  tap.w[2] * row[tap.idx[2]] + tap.w[3] * row[tap.idx[3]];
      }
    }
  }
  Tensor<T> out({c, out_h, out_w});
  for (int ci = 0; ci < c; ++ci) {
    const double* src = mid.data() + static_cast<std::size_t>(ci) * h * out_w;
    T* dst = out.data() + static_cast<std::size_t>(ci) * out_h * out_w;
    for (int i = 0; i < out_h; ++i) {
      const detail::ResampleTap& tap = ty[i];
      T* orow = dst + static_cast<std::size_t>(i) * out_w;
      for (int j = 0; j < out_w; ++j)
        orow[j] = static_cast<T>(tap.w[0] * src[static_cast<std::size_t>(tap.idx[0]) * out_w + j] +
                                 tap.w[1] * src[static_cast<std::size_t>(tap.idx[1]) * out_w + j] +
                                 tap.w[2] * src[static_cast<std::size_t>(tap.idx[2]) * out_w + j] +
                                 tap.w[3] * src[static_cast<std::size_t>(tap.idx[3]) * out_w + j]);
    }
  }
  return out;
}

}  // namespace girnet
