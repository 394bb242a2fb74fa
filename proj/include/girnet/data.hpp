#pragma once

// Degradation model and training patch sampling. LR clips are produced from
// HR clips by keeping the frames at even 0-based indices (the temporal
// degradation needs an odd frame count so the endpoints survive) and
// bicubic-downscaling each kept frame, clamped back to [0,1].

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include "girnet/bicubic.hpp"
#include "girnet/errors.hpp"
#include "girnet/ppm.hpp"
#include "girnet/rng.hpp"
#include "girnet/tensor.hpp"

namespace girnet {

constexpr int kLrPatch = 32;       // LR training patch side
constexpr int kPatchFrames = 7;    // HR frames per training sample

template <typename T>
void clamp_unit(Tensor<T>& t) {
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = std::clamp(t[i], T(0), T(1));
}

template <typename T>
VideoClip<T> degrade_clip(const VideoClip<T>& hr, int scale) {
  const int n = static_cast<int>(hr.frames.size());
  if (n == 0) throw DataError("degrade_clip: empty clip");
  if (n % 2 == 0)
    throw DataError("degrade_clip: even frame count " + std::to_string(n) +
                    " has no center alignment; need 2m+1 frames");
  if (scale < 1) throw std::invalid_argument("degrade_clip: scale must be >= 1");
  const int h = hr.frames[0].dim(1), w = hr.frames[0].dim(2);
  if (h % scale != 0 || w % scale != 0)
    throw DataError("degrade_clip: frame size " + std::to_string(h) + "x" + std::to_string(w) +
                    " not divisible by scale " + std::to_string(scale));
  VideoClip<T> lr;
  lr.frame_rate = hr.frame_rate;
  for (int i = 0; i < n; i += 2) {
    Tensor<T> small = bicubic_resize(hr.frames[i], h / scale, w / scale);
    clamp_unit(small);
    lr.frames.push_back(std::move(small));
  }
  return lr;
}

// One training sample: a 7-frame HR crop and its 4-frame degraded LR
// counterpart, with provenance for reproducibility.
template <typename T>
struct PatchSample {
  VideoClip<T> lr;  // 4 frames (3, 32, 32)
  VideoClip<T> hr;  // 7 frames (3, 32*scale, 32*scale)
  std::string source_id;
  int frame_start = 0;
  int y0 = 0;
  int x0 = 0;
};

// Deterministically samples a 7-frame temporal window and a square spatial
// crop of side 32*scale, then degrades the crop. The same seed always
// produces the same sample.
template <typename T>
PatchSample<T> random_patch(const VideoClip<T>& hr, int scale, std::uint64_t seed,
                            std::string source_id = "") {
  const int n = static_cast<int>(hr.frames.size());
  const int side = kLrPatch * scale;
  if (n < kPatchFrames)
    throw DataError("random_patch: clip '" + source_id + "' has " + std::to_string(n) +
                    " frames, need >= " + std::to_string(kPatchFrames));
  const int h = hr.frames[0].dim(1), w = hr.frames[0].dim(2);
  if (h < side || w < side)
    throw DataError("random_patch: clip '" + source_id + "' is " + std::to_string(h) + "x" +
                    std::to_string(w) + ", need >= " + std::to_string(side) + " per side");
  Rng rng(mix_seed({seed, 0x70617463685f7631ull}));
  PatchSample<T> out;
  out.source_id = std::move(source_id);
  out.frame_start = static_cast<int>(rng.uniform_int(n - kPatchFrames + 1));
  out.y0 = static_cast<int>(rng.uniform_int(h - side + 1));
  out.x0 = static_cast<int>(rng.uniform_int(w - side + 1));
  for (int t = 0; t < kPatchFrames; ++t) {
    const Tensor<T>& src = hr.frames[out.frame_start + t];
    Tensor<T> crop({3, side, side});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < side; ++i) {
        const T* row = src.data() + c * plane + static_cast<std::size_t>(out.y0 + i) * w + out.x0;
        std::copy(row, row + side, crop.data() + (static_cast<std::size_t>(c) * side + i) * side);
      }
    out.hr.frames.push_back(std::move(crop));
  }
  out.lr = degrade_clip(out.hr, scale);
  return out;
}

inline std::vector<std::string> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open manifest");
  std::vector<std::string> dirs;
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    const std::size_t b = line.find_last_not_of(" \t\r");
    dirs.push_back(line.substr(a, b - a + 1));
  }
  if (dirs.empty()) throw DataError(path + ": manifest lists no clips");
  return dirs;
}

// Training-free reference: every LR frame is bicubic-upscaled, and each
// missing in-between frame repeats its earlier neighbor. Produces 2n-1
// frames from n, mirroring the network's output layout.
template <typename T>
VideoClip<T> baseline_upsample(const VideoClip<T>& lr, int scale) {
  if (lr.frames.empty()) throw DataError("baseline_upsample: empty clip");
  const int h = lr.frames[0].dim(1), w = lr.frames[0].dim(2);
  VideoClip<T> out;
  out.frame_rate = lr.frame_rate;
  for (std::size_t i = 0; i < lr.frames.size(); ++i) {
    Tensor<T> up = bicubic_resize(lr.frames[i], h * scale, w * scale);
    clamp_unit(up);
    if (i) out.frames.push_back(out.frames.back());  // repeat earlier neighbor
    out.frames.push_back(std::move(up));
  }
  return out;
}

}  // namespace girnet
