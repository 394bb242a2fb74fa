#pragma once

// Training loss and evaluation metrics.
//
// The Charbonnier loss is the smooth L1 surrogate mean(sqrt(d^2 + eps^2)),
// taken per element and averaged over every pixel of every frame; eps
// defaults to 1e-3. PSNR runs over RGB in [0,1] with peak 1 (capped at
// 99 dB), SSIM uses the standard 11x11 Gaussian window with sigma 1.5,
// K1=0.01, K2=0.03, L=1, valid windows only.

#include <cmath>
#include <span>
#include <vector>

#include "girnet/autodiff.hpp"
#include "girnet/ppm.hpp"
#include "girnet/tensor.hpp"

namespace girnet {

constexpr double kCharbonnierEps = 1e-3;
constexpr double kPsnrCap = 99.0;

// Value-only Charbonnier over a list of frame pairs.
template <typename T>
double charbonnier_value(std::span<const Tensor<T>> pred, std::span<const Tensor<T>> target,
                         double eps = kCharbonnierEps) {
  if (pred.size() != target.size() || pred.empty())
    throw std::invalid_argument("charbonnier: got " + std::to_string(pred.size()) +
                                " predictions vs " + std::to_string(target.size()) + " targets");
  double acc = 0;
  std::size_t count = 0;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    check_same_shape(pred[f], target[f], "charbonnier");
    for (std::size_t i = 0; i < pred[f].numel(); ++i) {
      const double d = static_cast<double>(pred[f][i]) - static_cast<double>(target[f][i]);
      acc += std::sqrt(d * d + eps * eps);
    }
    count += pred[f].numel();
  }
  return acc / static_cast<double>(count);
}

// Differentiable Charbonnier between predicted frame vars and fixed targets.
template <typename T>
Var<T> charbonnier_loss(std::span<const Var<T>> pred, std::span<const Tensor<T>> target,
                        double eps = kCharbonnierEps) {
  if (pred.size() != target.size() || pred.empty())
    throw std::invalid_argument("charbonnier_loss: got " + std::to_string(pred.size()) +
                                " predictions vs " + std::to_string(target.size()) + " targets");
  Tape<T>& t = *pred[0].tape;
  std::vector<int> ids;
  double acc = 0;
  std::size_t count = 0;
  std::vector<Tensor<T>> targets(target.begin(), target.end());
  for (std::size_t f = 0; f < pred.size(); ++f) {
    detail::check_same_tape(pred[0], pred[f], "charbonnier_loss");
    const Tensor<T>& pv = t.value(pred[f].id);
    check_same_shape(pv, targets[f], "charbonnier_loss");
    for (std::size_t i = 0; i < pv.numel(); ++i) {
      const double d = static_cast<double>(pv[i]) - static_cast<double>(targets[f][i]);
      acc += std::sqrt(d * d + eps * eps);
    }
    count += pv.numel();
    ids.push_back(pred[f].id);
  }
  Tensor<T> value({1}, {static_cast<T>(acc / static_cast<double>(count))});
  return t.make_node("charbonnier_loss", std::move(value), std::move(ids),
                     [targets = std::move(targets), eps, count](Tape<T>& tp, int id) {
                       const T g = tp.out_grad(id)[0];
                       const std::vector<int>& ins = tp.inputs(id);
                       const double inv = 1.0 / static_cast<double>(count);
                       for (std::size_t f = 0; f < ins.size(); ++f) {
                         if (!tp.requires_grad(ins[f])) continue;
                         const Tensor<T>& pv = tp.value(ins[f]);
                         Tensor<T>& gx = tp.grad_buffer(ins[f]);
                         for (std::size_t i = 0; i < pv.numel(); ++i) {
                           const double d = static_cast<double>(pv[i]) -
                                            static_cast<double>(targets[f][i]);
                           gx[i] += static_cast<T>(static_cast<double>(g) * inv * d /
                                                   std::sqrt(d * d + eps * eps));
                         }
                       }
                     });
}

template <typename T>
Var<T> charbonnier_loss(Var<T> pred, const Tensor<T>& target, double eps = kCharbonnierEps) {
  return charbonnier_loss(std::span<const Var<T>>(&pred, 1),
                          std::span<const Tensor<T>>(&target, 1), eps);
}

template <typename T>
double psnr(const Tensor<T>& pred, const Tensor<T>& target, double peak = 1.0) {
  check_same_shape(pred, target, "psnr");
  double mse = 0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(pred.numel());
  if (mse <= 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

// BT.601 luma: (3,H,W) -> (1,H,W).
template <typename T>
Tensor<T> luma(const Tensor<T>& rgb) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3)
    throw std::invalid_argument("luma: expected (3,H,W), got " + shape_str(rgb.shape()));
  const std::size_t plane = static_cast<std::size_t>(rgb.dim(1)) * rgb.dim(2);
  Tensor<T> y({1, rgb.dim(1), rgb.dim(2)});
  for (std::size_t i = 0; i < plane; ++i)
    y[i] = static_cast<T>(0.299) * rgb[i] + static_cast<T>(0.587) * rgb[plane + i] +
           static_cast<T>(0.114) * rgb[2 * plane + i];
  return y;
}

namespace detail {

inline const std::vector<double>& ssim_window() {
  static const std::vector<double> win = [] {
    std::vector<double> w(11);
    double sum = 0;
    for (int i = 0; i < 11; ++i) {
      const double d = i - 5;
      w[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
      sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
  }();
  return win;
}

// Valid-mode separable Gaussian blur of one plane (double precision).
inline std::vector<double> ssim_blur(const std::vector<double>& img, int h, int w) {
  const std::vector<double>& win = ssim_window();
  const int oh = h - 10, ow = w - 10;
  std::vector<double> mid(static_cast<std::size_t>(h) * ow);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < ow; ++j) {
      double acc = 0;
      for (int k = 0; k < 11; ++k) acc += win[k] * img[static_cast<std::size_t>(i) * w + j + k];
      mid[static_cast<std::size_t>(i) * ow + j] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int i = 0; i < oh; ++i)
    for (int j = 0; j < ow; ++j) {
      double acc = 0;
      for (int k = 0; k < 11; ++k) acc += win[k] * mid[static_cast<std::size_t>(i + k) * ow + j];
      out[static_cast<std::size_t>(i) * ow + j] = acc;
    }
  return out;
}

}  // namespace detail

template <typename T>
double ssim(const Tensor<T>& pred, const Tensor<T>& target) {
  check_same_shape(pred, target, "ssim");
  if (pred.rank() != 3)
    throw std::invalid_argument("ssim: expected (C,H,W), got " + shape_str(pred.shape()));
  const int c = pred.dim(0), h = pred.dim(1), w = pred.dim(2);
  if (h < 11 || w < 11)
    throw std::invalid_argument("ssim: image " + shape_str(pred.shape()) +
                                " smaller than the 11x11 window");
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;  // (K*L)^2 with L=1
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  double total = 0;
  for (int ci = 0; ci < c; ++ci) {
    std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      x[i] = static_cast<double>(pred[ci * plane + i]);
      y[i] = static_cast<double>(target[ci * plane + i]);
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const std::vector<double> mx = detail::ssim_blur(x, h, w);
    const std::vector<double> my = detail::ssim_blur(y, h, w);
    const std::vector<double> mxx = detail::ssim_blur(xx, h, w);
    const std::vector<double> myy = detail::ssim_blur(yy, h, w);
    const std::vector<double> mxy = detail::ssim_blur(xy, h, w);
    double acc = 0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = mxx[i] - mx[i] * mx[i];
      const double vy = myy[i] - my[i] * my[i];
      const double vxy = mxy[i] - mx[i] * my[i];
      acc += ((2.0 * mx[i] * my[i] + c1) * (2.0 * vxy + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / c;
}

struct MetricReport {
  std::vector<double> psnr_db;
  std::vector<double> ssim_val;
  double mean_psnr = 0;
  double mean_ssim = 0;
  double charbonnier = 0;
};

template <typename T>
MetricReport evaluate_clip(const VideoClip<T>& pred, const VideoClip<T>& gt,
                           bool luma_only = false) {
  if (pred.frames.size() != gt.frames.size() || pred.frames.empty())
    throw std::invalid_argument("evaluate_clip: got " + std::to_string(pred.frames.size()) +
                                " predicted frames vs " + std::to_string(gt.frames.size()));
  MetricReport r;
  r.charbonnier = charbonnier_value<T>(pred.frames, gt.frames);
  for (std::size_t i = 0; i < pred.frames.size(); ++i) {
    const Tensor<T> p = luma_only ? luma(pred.frames[i]) : pred.frames[i];
    const Tensor<T> g = luma_only ? luma(gt.frames[i]) : gt.frames[i];
    r.psnr_db.push_back(psnr(p, g));
    r.ssim_val.push_back(ssim(p, g));
    r.mean_psnr += r.psnr_db.back();
    r.mean_ssim += r.ssim_val.back();
  }
  r.mean_psnr /= static_cast<double>(pred.frames.size());
  r.mean_ssim /= static_cast<double>(pred.frames.size());
  return r;
}

}  // namespace girnet
