#pragma once

// Bilinear grid sampling and deformable convolution (v1 style: offsets only,
// no modulation mask, one deformable group).
//
// Offset fields are laid out tap-major: for a K x K kernel, channels
// [2k, 2k+1] hold the (dy, dx) displacement of tap k in row-major kernel
// order. Sampling positions falling outside the image use zero padding, so
// the op stays differentiable everywhere except at integer crossings.

#include <cmath>

#include "girnet/autodiff.hpp"
#include "girnet/conv.hpp"
#include "girnet/errors.hpp"
#include "girnet/tensor.hpp"

namespace girnet {

namespace detail {

// Value of one bilinear sample with zero padding outside [0,H-1]x[0,W-1].
template <typename T>
T bilinear_at(const T* plane, int h, int w, T y, T x) {
  if (kink_watch) {
    // Derivative corners sit on the integer grid lines of the padded cell
    // lattice; far outside the image the function is constant zero.
    if (y > T(-2) && y < T(h + 1))
      watch_kink(std::abs(static_cast<double>(y) - std::round(static_cast<double>(y))));
    if (x > T(-2) && x < T(w + 1))
      watch_kink(std::abs(static_cast<double>(x) - std::round(static_cast<double>(x))));
  }
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const T wy = y - static_cast<T>(y0);
  const T wx = x - static_cast<T>(x0);
  T v = T(0);
  for (int dy = 0; dy < 2; ++dy) {
    const int yy = y0 + dy;
    if (yy < 0 || yy >= h) continue;
    const T fy = dy ? wy : T(1) - wy;
    for (int dx = 0; dx < 2; ++dx) {
      const int xx = x0 + dx;
      if (xx < 0 || xx >= w) continue;
      const T fx = dx ? wx : T(1) - wx;
      v += fy * fx * plane[static_cast<std::size_t>(yy) * w + xx];
    }
  }
  return v;
}

// Backward of one bilinear sample: accumulates input-plane gradients and
// returns (dvalue/dy, dvalue/dx).
template <typename T>
void bilinear_back(const T* plane, T* gplane, int h, int w, T y, T x, T g, T& gy, T& gx) {
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const T wy = y - static_cast<T>(y0);
  const T wx = x - static_cast<T>(x0);
  for (int dy = 0; dy < 2; ++dy) {
    const int yy = y0 + dy;
    if (yy < 0 || yy >= h) continue;
    const T fy = dy ? wy : T(1) - wy;
    const T sy = dy ? T(1) : T(-1);
    for (int dx = 0; dx < 2; ++dx) {
      const int xx = x0 + dx;
      if (xx < 0 || xx >= w) continue;
      const T fx = dx ? wx : T(1) - wx;
      const T sx = dx ? T(1) : T(-1);
      const std::size_t at = static_cast<std::size_t>(yy) * w + xx;
      if (gplane) gplane[at] += g * fy * fx;
      const T p = plane[at];
      gy += g * sy * fx * p;
      gx += g * fy * sx * p;
    }
  }
}

template <typename T>
void check_coords_finite(const Tensor<T>& coords, const char* who) {
  if (!coords.all_finite())
    throw std::invalid_argument(std::string(who) + ": coordinates must be finite");
}

}  // namespace detail

// Samples x at per-location (y, x) positions given in absolute pixel
// coordinates. coords has shape (N, 2, H_o, W_o): channel 0 holds y, channel
// 1 holds x; one position is shared by all C channels. Differentiable wrt
// both the image and the coordinates.
template <typename T>
Var<T> bilinear_sample(Var<T> x, Var<T> coords) {
  detail::check_same_tape(x, coords, "bilinear_sample");
  Tape<T>& t = *x.tape;
  const Tensor<T>& xv = t.value(x.id);
  const Tensor<T>& cv = t.value(coords.id);
  if (xv.rank() != 4 || cv.rank() != 4 || cv.dim(1) != 2 || cv.dim(0) != xv.dim(0))
    throw std::invalid_argument("bilinear_sample: need x (N,C,H,W) and coords (N,2,Ho,Wo), got " +
                                shape_str(xv.shape()) + " and " + shape_str(cv.shape()));
  detail::check_coords_finite(cv, "bilinear_sample");
  const int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  const int oh = cv.dim(2), ow = cv.dim(3);
  const std::size_t in_plane = static_cast<std::size_t>(h) * w;
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
  Tensor<T> out({n, c, oh, ow});
  for (int b = 0; b < n; ++b) {
    const T* ys = cv.data() + static_cast<std::size_t>(b) * 2 * out_plane;
    const T* xs = ys + out_plane;
    for (int ci = 0; ci < c; ++ci) {
      const T* plane = xv.data() + (static_cast<std::size_t>(b) * c + ci) * in_plane;
      T* dst = out.data() + (static_cast<std::size_t>(b) * c + ci) * out_plane;
      for (std::size_t i = 0; i < out_plane; ++i)
        dst[i] = detail::bilinear_at(plane, h, w, ys[i], xs[i]);
    }
  }
  return t.make_node("bilinear_sample", std::move(out), {x.id, coords.id},
                     [](Tape<T>& tp, int id) {
                       const std::vector<int>& in = tp.inputs(id);
                       const Tensor<T>& g = tp.out_grad(id);
                       const Tensor<T>& xv = tp.value(in[0]);
                       const Tensor<T>& cv = tp.value(in[1]);
                       const int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
                       const std::size_t in_plane = static_cast<std::size_t>(h) * w;
                       const std::size_t out_plane =
                           static_cast<std::size_t>(g.dim(2)) * g.dim(3);
                       Tensor<T>* gx = tp.requires_grad(in[0]) ? &tp.grad_buffer(in[0]) : nullptr;
                       Tensor<T>* gc = tp.requires_grad(in[1]) ? &tp.grad_buffer(in[1]) : nullptr;
                       for (int b = 0; b < n; ++b) {
                         const T* ys = cv.data() + static_cast<std::size_t>(b) * 2 * out_plane;
                         const T* xs = ys + out_plane;
                         T* gys = gc ? gc->data() + static_cast<std::size_t>(b) * 2 * out_plane
                                     : nullptr;
                         T* gxs = gys ? gys + out_plane : nullptr;
                         for (int ci = 0; ci < c; ++ci) {
                           const std::size_t at = (static_cast<std::size_t>(b) * c + ci);
                           const T* plane = xv.data() + at * in_plane;
                           T* gplane = gx ? gx->data() + at * in_plane : nullptr;
                           const T* gout = g.data() + at * out_plane;
                           for (std::size_t i = 0; i < out_plane; ++i) {
                             T gy = T(0), gxx = T(0);
                             detail::bilinear_back(plane, gplane, h, w, ys[i], xs[i], gout[i], gy,
                                                   gxx);
                             if (gys) {
                               gys[i] += gy;
                               gxs[i] += gxx;
                             }
                           }
                         }
                       }
                     });
}

namespace detail {

// Lowers one batch entry to the deformable patch matrix: row (ci*K+ky)*K+kx,
// column i*W+j holds x sampled at the displaced tap position.
template <typename T>
void deform_im2col(const T* x, const T* off, int c_in, int h, int w, int k, T* col) {
  const int p = (k - 1) / 2;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int ci = 0; ci < c_in; ++ci) {
    const T* src = x + static_cast<std::size_t>(ci) * plane;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const int tap = ky * k + kx;
        const T* dy = off + static_cast<std::size_t>(2 * tap) * plane;
        const T* dx = off + static_cast<std::size_t>(2 * tap + 1) * plane;
        T* row = col + (static_cast<std::size_t>(ci) * k * k + tap) * plane;
        for (int i = 0; i < h; ++i)
          for (int j = 0; j < w; ++j) {
            const std::size_t at = static_cast<std::size_t>(i) * w + j;
            row[at] = bilinear_at(src, h, w, static_cast<T>(i + ky - p) + dy[at],
                                  static_cast<T>(j + kx - p) + dx[at]);
          }
      }
    }
  }
}

}  // namespace detail

// Deformable convolution: output(n,co,i,j) = sum_k W_k . x sampled at
// (i + dy_k, j + dx_k) around tap k's nominal grid position, plus bias.
// Fixed stride 1 and padding (K-1)/2, so the output matches the input
// spatially and the offset field must be (N, 2K^2, H, W).
template <typename T>
Var<T> deformable_conv2d(Var<T> x, Var<T> offsets, Var<T> w, Var<T> b) {
  detail::check_same_tape(x, offsets, "deformable_conv2d");
  detail::check_same_tape(x, w, "deformable_conv2d");
  detail::check_same_tape(x, b, "deformable_conv2d");
  Tape<T>& t = *x.tape;
  const Tensor<T>& xv = t.value(x.id);
  const Tensor<T>& ov = t.value(offsets.id);
  const Tensor<T>& wv = t.value(w.id);
  const Tensor<T>& bv = t.value(b.id);
  detail::check_conv_args(xv, wv, &bv, 1, (wv.dim(2) - 1) / 2);
  if (wv.dim(2) != wv.dim(3))
    throw std::invalid_argument("deformable_conv2d: kernel must be square, got " +
                                shape_str(wv.shape()));
  const int n = xv.dim(0), c_in = xv.dim(1), h = xv.dim(2), wd = xv.dim(3);
  const int c_out = wv.dim(0), k = wv.dim(2);
  if (ov.rank() != 4 || ov.dim(0) != n || ov.dim(1) != 2 * k * k || ov.dim(2) != h ||
      ov.dim(3) != wd)
    throw std::invalid_argument("deformable_conv2d: offsets " + shape_str(ov.shape()) +
                                " do not match input " + shape_str(xv.shape()) + " with K=" +
                                std::to_string(k));
  if (!ov.all_finite()) throw NumericalError("deformable_conv2d: non-finite offsets");

  const int krows = c_in * k * k;
  const std::size_t plane = static_cast<std::size_t>(h) * wd;
  Tensor<T> out({n, c_out, h, wd});
  std::vector<T>& col = detail::conv_scratch<T>();
  col.resize(static_cast<std::size_t>(krows) * plane);
  for (int bn = 0; bn < n; ++bn) {
    const T* xb = xv.data() + static_cast<std::size_t>(bn) * c_in * plane;
    const T* ob = ov.data() + static_cast<std::size_t>(bn) * 2 * k * k * plane;
    T* dst = out.data() + static_cast<std::size_t>(bn) * c_out * plane;
    for (int co = 0; co < c_out; ++co)
      std::fill(dst + co * plane, dst + (co + 1) * plane, bv[co]);
    detail::deform_im2col(xb, ob, c_in, h, wd, k, col.data());
    detail::gemm(CblasNoTrans, CblasNoTrans, c_out, static_cast<int>(plane), krows, T(1),
                 wv.data(), krows, col.data(), static_cast<int>(plane), T(1), dst,
                 static_cast<int>(plane));
  }

  return t.make_node(
      "deformable_conv2d", std::move(out), {x.id, offsets.id, w.id, b.id},
      [](Tape<T>& tp, int id) {
        const std::vector<int>& in = tp.inputs(id);
        const Tensor<T>& g = tp.out_grad(id);
        const Tensor<T>& xv = tp.value(in[0]);
        const Tensor<T>& ov = tp.value(in[1]);
        const Tensor<T>& wv = tp.value(in[2]);
        const int n = xv.dim(0), c_in = xv.dim(1), h = xv.dim(2), wd = xv.dim(3);
        const int c_out = wv.dim(0), k = wv.dim(2), p = (k - 1) / 2;
        const int krows = c_in * k * k;
        const std::size_t plane = static_cast<std::size_t>(h) * wd;
        Tensor<T>* gx = tp.requires_grad(in[0]) ? &tp.grad_buffer(in[0]) : nullptr;
        Tensor<T>* go = tp.requires_grad(in[1]) ? &tp.grad_buffer(in[1]) : nullptr;
        Tensor<T>* gw = tp.requires_grad(in[2]) ? &tp.grad_buffer(in[2]) : nullptr;
        Tensor<T>* gb = tp.requires_grad(in[3]) ? &tp.grad_buffer(in[3]) : nullptr;
        std::vector<T>& col = detail::conv_scratch<T>();
        thread_local std::vector<T> colg;
        col.resize(static_cast<std::size_t>(krows) * plane);
        colg.resize(static_cast<std::size_t>(krows) * plane);
        for (int bn = 0; bn < n; ++bn) {
          const T* xb = xv.data() + static_cast<std::size_t>(bn) * c_in * plane;
          const T* ob = ov.data() + static_cast<std::size_t>(bn) * 2 * k * k * plane;
          const T* gbatch = g.data() + static_cast<std::size_t>(bn) * c_out * plane;
          if (gb)
            for (int co = 0; co < c_out; ++co) {
              const T* src = gbatch + static_cast<std::size_t>(co) * plane;
              double acc = 0;
              for (std::size_t i = 0; i < plane; ++i) acc += static_cast<double>(src[i]);
              (*gb)[co] += static_cast<T>(acc);
            }
          if (gw) {
            detail::deform_im2col(xb, ob, c_in, h, wd, k, col.data());
            detail::gemm(CblasNoTrans, CblasTrans, c_out, krows, static_cast<int>(plane), T(1),
                         gbatch, static_cast<int>(plane), col.data(), static_cast<int>(plane),
                         T(1), gw->data(), krows);
          }
          if (!gx && !go) continue;
          detail::gemm(CblasTrans, CblasNoTrans, krows, static_cast<int>(plane), c_out, T(1),
                       wv.data(), krows, gbatch, static_cast<int>(plane), T(0), colg.data(),
                       static_cast<int>(plane));
          T* gxb = gx ? gx->data() + static_cast<std::size_t>(bn) * c_in * plane : nullptr;
          T* gob = go ? go->data() + static_cast<std::size_t>(bn) * 2 * k * k * plane : nullptr;
          for (int ci = 0; ci < c_in; ++ci) {
            const T* src = xb + static_cast<std::size_t>(ci) * plane;
            T* gplane = gxb ? gxb + static_cast<std::size_t>(ci) * plane : nullptr;
            for (int tap = 0; tap < k * k; ++tap) {
              const int ky = tap / k, kx = tap % k;
              const T* dy = ob + static_cast<std::size_t>(2 * tap) * plane;
              const T* dx = ob + static_cast<std::size_t>(2 * tap + 1) * plane;
              const T* crow = colg.data() + (static_cast<std::size_t>(ci) * k * k + tap) * plane;
              T* gdy = gob ? gob + static_cast<std::size_t>(2 * tap) * plane : nullptr;
              T* gdx = gob ? gob + static_cast<std::size_t>(2 * tap + 1) * plane : nullptr;
              for (int i = 0; i < h; ++i)
                for (int j = 0; j < wd; ++j) {
                  const std::size_t at = static_cast<std::size_t>(i) * wd + j;
                  T gy = T(0), gxx = T(0);
                  detail::bilinear_back(src, gplane, h, wd,
                                        static_cast<T>(i + ky - p) + dy[at],
                                        static_cast<T>(j + kx - p) + dx[at], crow[at], gy, gxx);
                  if (gdy) {
                    gdy[at] += gy;
                    gdx[at] += gxx;
                  }
                }
            }
          }
        }
      });
}

template <typename T>
Var<T> deformable_conv2d(Var<T> x, Var<T> offsets, const ConvRef<T>& p) {
  if (p.stride != 1)
    throw std::invalid_argument("deformable_conv2d: only stride 1 is supported");
  return deformable_conv2d(x, offsets, p.weight, p.bias);
}

}  // namespace girnet
