#pragma once

// Clip I/O over binary PPM (P6) frames. A clip directory holds
// frame_000000.ppm, frame_000001.ppm, ... with 6-digit contiguous 0-based
// indices; every frame is 8-bit RGB with maxval 255. Pixels decode to [0,1]
// as v/255 and encode back with round-half-up quantization, so a round trip
// moves a channel by at most 1/510.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "girnet/errors.hpp"
#include "girnet/tensor.hpp"

namespace girnet {

template <typename T = float>
struct VideoClip {
  std::vector<Tensor<T>> frames;  // each (3,H,W), values in [0,1]
  std::optional<double> frame_rate;

  int height() const { return frames.empty() ? 0 : frames[0].dim(1); }
  int width() const { return frames.empty() ? 0 : frames[0].dim(2); }
};

namespace detail {

inline void skip_ppm_space(const std::string& buf, std::size_t& at) {
  while (at < buf.size()) {
    const char ch = buf[at];
    if (ch == '#') {
      while (at < buf.size() && buf[at] != '\n') ++at;
    } else if (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n') {
      ++at;
    } else {
      break;
    }
  }
}

inline long parse_ppm_int(const std::string& buf, std::size_t& at, const std::string& path) {
  skip_ppm_space(buf, at);
  std::size_t end = at;
  while (end < buf.size() && buf[end] >= '0' && buf[end] <= '9') ++end;
  if (end == at) throw DataError(path + ": malformed PPM header");
  long v = 0;
  for (; at < end; ++at) v = v * 10 + (buf[at] - '0');
  return v;
}

}  // namespace detail

template <typename T = float>
Tensor<T> load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '6')
    throw DataError(path + ": not a binary PPM (P6) file");
  std::size_t at = 2;
  const long w = detail::parse_ppm_int(buf, at, path);
  const long h = detail::parse_ppm_int(buf, at, path);
  const long maxval = detail::parse_ppm_int(buf, at, path);
  if (maxval != 255) throw DataError(path + ": maxval must be 255, got " + std::to_string(maxval));
  if (w < 1 || h < 1) throw DataError(path + ": bad dimensions");
  ++at;  // single whitespace byte after maxval
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (buf.size() - at < need)
    throw DataError(path + ": truncated pixel data (" + std::to_string(buf.size() - at) + " of " +
                    std::to_string(need) + " bytes)");
  Tensor<T> frame({3, static_cast<int>(h), static_cast<int>(w)});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const unsigned char* px = reinterpret_cast<const unsigned char*>(buf.data() + at);
  for (std::size_t i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c)
      frame[static_cast<std::size_t>(c) * plane + i] = static_cast<T>(px[i * 3 + c]) / T(255);
  return frame;
}

template <typename T>
void save_ppm(const Tensor<T>& frame, const std::string& path) {
  if (frame.rank() != 3 || frame.dim(0) != 3)
    throw std::invalid_argument("save_ppm: frame must be (3,H,W), got " +
                                shape_str(frame.shape()));
  const int h = frame.dim(1), w = frame.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::string buf = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  const std::size_t head = buf.size();
  buf.resize(head + plane * 3);
  for (std::size_t i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c) {
      double v = static_cast<double>(frame[static_cast<std::size_t>(c) * plane + i]);
      v = std::clamp(v, 0.0, 1.0);
      buf[head + i * 3 + c] = static_cast<char>(static_cast<unsigned char>(
          std::floor(v * 255.0 + 0.5)));
    }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path + ": cannot write");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError(path + ": write failed");
}

inline std::string frame_filename(int index) {
  char name[32];
  std::snprintf(name, sizeof(name), "frame_%06d.ppm", index);
  return name;
}

template <typename T = float>
VideoClip<T> load_clip(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError(dir + ": not a directory");
  std::vector<int> indices;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() == 16 && name.rfind("frame_", 0) == 0 && name.substr(12) == ".ppm" &&
        std::all_of(name.begin() + 6, name.begin() + 12, [](char c) { return c >= '0' && c <= '9'; }))
      indices.push_back(std::stoi(name.substr(6, 6)));
  }
  if (indices.empty()) throw DataError(dir + ": no frames found");
  std::sort(indices.begin(), indices.end());
  for (std::size_t i = 0; i < indices.size(); ++i)
    if (indices[i] != static_cast<int>(i))
      throw DataError(dir + ": missing frame index " + std::to_string(i) + " (found " +
                      frame_filename(indices[i]) + ")");
  VideoClip<T> clip;
  clip.frames.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    clip.frames.push_back(load_ppm<T>((fs::path(dir) / frame_filename(static_cast<int>(i))).string()));
    if (!clip.frames.back().same_shape(clip.frames[0]))
      throw DataError(dir + ": frame " + std::to_string(i) + " has shape " +
                      shape_str(clip.frames.back().shape()) + ", expected " +
                      shape_str(clip.frames[0].shape()));
  }
  return clip;
}

template <typename T>
void save_clip(const VideoClip<T>& clip, const std::string& dir) {
  namespace fs = std::filesystem;
  if (clip.frames.empty()) throw std::invalid_argument("save_clip: empty clip");
  fs::create_directories(dir);
  for (std::size_t i = 0; i < clip.frames.size(); ++i)
    save_ppm(clip.frames[i], (fs::path(dir) / frame_filename(static_cast<int>(i))).string());
}

}  // namespace girnet
