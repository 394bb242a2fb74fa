#pragma once

// Deterministic randomness. std::mt19937_64 is fully specified by the
// standard, so streams are identical across platforms and compilers. The
// uniform mappings are written out by hand because std::uniform_*_distribution
// is not portable across standard library implementations.

#include <cstdint>
#include <random>

#include "girnet/tensor.hpp"

namespace girnet {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Hash-combines a list of integers into a single stream seed. Used to derive
// independent deterministic streams, e.g. per (run seed, epoch, clip index).
inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t state = 0x6A09E667F3BCC909ull;
  for (std::uint64_t p : parts) {
    state ^= splitmix64(state) + p;
    splitmix64(state);
  }
  return splitmix64(state);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0,n) via rejection sampling, bias-free.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 eng_;
};

template <typename T>
Tensor<T> random_uniform(Shape shape, Rng& rng, T lo, T hi) {
  Tensor<T> t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<T>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
  return t;
}

}  // namespace girnet
