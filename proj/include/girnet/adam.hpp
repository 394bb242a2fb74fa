#pragma once

// Adam with bias correction, plus the stepped learning-rate schedule used by
// the trainer (halve every 60 epochs).

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "girnet/tensor.hpp"

namespace girnet {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.99;
  double eps = 1e-8;
};

template <typename T>
struct OptimState {
  AdamConfig cfg;
  std::int64_t t = 0;  // completed steps
  std::map<std::string, Tensor<T>> m;
  std::map<std::string, Tensor<T>> v;

  static OptimState init(const std::map<std::string, Tensor<T>>& params, AdamConfig cfg = {}) {
    OptimState s;
    s.cfg = cfg;
    for (const auto& [name, p] : params) {
      s.m.emplace(name, Tensor<T>(p.shape()));
      s.v.emplace(name, Tensor<T>(p.shape()));
    }
    return s;
  }
};

// One in-place Adam update. `grads` must hold an entry per parameter.
template <typename T>
void adam_step(std::map<std::string, Tensor<T>>& params,
               const std::map<std::string, Tensor<T>>& grads, OptimState<T>& state,
               double lr_override = -1.0) {
  const double lr = lr_override >= 0 ? lr_override : state.cfg.lr;
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.cfg.beta2, static_cast<double>(state.t));
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end())
      throw std::invalid_argument("adam_step: missing gradient for parameter '" + name + "'");
    check_same_shape(p, git->second, ("adam_step('" + name + "')").c_str());
    Tensor<T>& m = state.m.at(name);
    Tensor<T>& v = state.v.at(name);
    const T* g = git->second.data();
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = state.cfg.beta1 * static_cast<double>(m[i]) + (1.0 - state.cfg.beta1) * gi;
      const double vi =
          state.cfg.beta2 * static_cast<double>(v[i]) + (1.0 - state.cfg.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      p[i] = static_cast<T>(static_cast<double>(p[i]) - lr * mhat / (std::sqrt(vhat) + state.cfg.eps));
    }
  }
}

inline double lr_schedule(int epoch, double base_lr = 1e-4) {
  if (epoch < 0) throw std::invalid_argument("lr_schedule: epoch must be >= 0");
  return base_lr * std::pow(0.5, epoch / 60);
}

}  // namespace girnet
