#pragma once

// Synthetic video clips and temp-dir scaffolding shared by the test binaries.

#include <girnet/ppm.hpp>
#include <girnet/rng.hpp>

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace testsupport {

// Translating sinusoid gratings: smooth gradient patterns that drift at a
// constant per-clip velocity. Band-limited, so bicubic degradation is clean,
// while frame-repeat baselines pay for the motion.
inline girnet::VideoClip<float> translating_clip(uint64_t seed, int frames = 7, int side = 64) {
  girnet::Rng rng(girnet::mix_seed({seed, 0x73796e636c6970ull}));
  struct Wave {
    double fy, fx, phase, amp;
  };
  // One coarse grating for structure plus one near the downsampled grid's
  // resolving limit, so plain bicubic upscaling visibly underfits the frames.
  std::vector<Wave> waves(2);
  waves[0].fy = (double)rng.uniform_int(3);
  waves[0].fx = 1.0 + (double)rng.uniform_int(3);
  waves[0].amp = 0.09;
  waves[1].fy = 11.0 + (double)rng.uniform_int(3);
  waves[1].fx = 11.0 + (double)rng.uniform_int(3);
  waves[1].amp = 0.33;
  for (auto& wv : waves) wv.phase = rng.uniform(0.0, 6.28318);
  const double vy = (rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0) * rng.uniform(2.0, 3.5);
  const double vx = (rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0) * rng.uniform(2.0, 3.5);
  const double rgb_shift = rng.uniform(0.3, 0.9);

  girnet::VideoClip<float> clip;
  const double tau = 6.283185307179586;
  for (int t = 0; t < frames; ++t) {
    girnet::Tensor<float> img({3, side, side});
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
          double v = 0.5;
          for (const auto& wv : waves) {
            double arg = tau * (wv.fy * (y - vy * t) + wv.fx * (x - vx * t)) / side;
            v += wv.amp * std::sin(arg + wv.phase + c * rgb_shift);
          }
          img.at(c, y, x) = (float)v;
        }
    clip.frames.push_back(std::move(img));
  }
  return clip;
}

inline std::vector<girnet::VideoClip<float>> smoke_clips(int n = 8, uint64_t seed = 42) {
  std::vector<girnet::VideoClip<float>> out;
  for (int i = 0; i < n; ++i) out.push_back(translating_clip(seed + (uint64_t)i));
  return out;
}

// Unique scratch directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0;; ++i) {
      auto cand = base / (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(i));
      std::error_code ec;
      if (std::filesystem::create_directory(cand, ec)) {
        path = cand;
        return;
      }
      if (i > 1000) throw std::runtime_error("TempDir: cannot create scratch dir under " + base.string());
    }
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path.string(); }
};

}  // namespace testsupport
