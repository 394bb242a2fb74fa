#pragma once

// Slow reference implementations, independent of the library kernels, used
// only to cross-check the fast paths.

#include <cmath>
#include <vector>

#include <girnet/tensor.hpp>

namespace oracle {

// Direct six-loop convolution, NCHW x OIHW, zero padding.
template <typename T>
girnet::Tensor<T> conv2d(const girnet::Tensor<T>& x, const girnet::Tensor<T>& w,
                         const girnet::Tensor<T>* bias, int stride, int pad) {
  const int n = x.dim(0), c_in = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int c_out = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (wd + 2 * pad - kw) / stride + 1;
  girnet::Tensor<T> out({n, c_out, oh, ow});
  for (int b = 0; b < n; ++b)
    for (int co = 0; co < c_out; ++co)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = bias ? static_cast<double>((*bias)[co]) : 0.0;
          for (int ci = 0; ci < c_in; ++ci)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const int iy = oy * stride - pad + ky;
                const int ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                acc += static_cast<double>(x.at(b, ci, iy, ix)) *
                       static_cast<double>(w.at(co, ci, ky, kx));
              }
          out.at(b, co, oy, ox) = static_cast<T>(acc);
        }
  return out;
}

// SSIM by direct sliding-window accumulation: 11x11 Gaussian sigma 1.5,
// valid windows only, k1 = 0.01, k2 = 0.03, dynamic range 1.
template <typename T>
double ssim(const girnet::Tensor<T>& a, const girnet::Tensor<T>& b) {
  const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
  std::vector<double> win(11 * 11);
  {
    double sum = 0;
    for (int i = 0; i < 11; ++i)
      for (int j = 0; j < 11; ++j) {
        const double dy = i - 5, dx = j - 5;
        win[i * 11 + j] = std::exp(-(dy * dy + dx * dx) / (2.0 * 1.5 * 1.5));
        sum += win[i * 11 + j];
      }
    for (double& v : win) v /= sum;
  }
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0;
  std::size_t count = 0;
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y + 11 <= h; ++y)
      for (int x = 0; x + 11 <= w; ++x) {
        double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            const double va = a.at(ch, y + i, x + j);
            const double vb = b.at(ch, y + i, x + j);
            const double wt = win[i * 11 + j];
            mu_a += wt * va;
            mu_b += wt * vb;
            aa += wt * va * va;
            bb += wt * vb * vb;
            ab += wt * va * vb;
          }
        const double var_a = aa - mu_a * mu_a;
        const double var_b = bb - mu_b * mu_b;
        const double cov = ab - mu_a * mu_b;
        total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                 ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        ++count;
      }
  return total / static_cast<double>(count);
}

}  // namespace oracle
