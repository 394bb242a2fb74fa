#pragma once

// Dense row-major tensor with a small dynamic shape (rank 1..5).
// Dtype is a template parameter; float is used for training, double for
// gradient checking. All size/shape violations throw std::invalid_argument.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace girnet {

using Shape = std::vector<int>;

constexpr int kMaxRank = 5;

inline std::string shape_str(std::span<const int> s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ')';
  return os.str();
}

inline std::string shape_str(const Shape& s) {
  return shape_str(std::span<const int>(s.data(), s.size()));
}

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) n *= static_cast<std::size_t>(d);
  return n;
}

inline void check_shape_valid(const Shape& s, const char* who) {
  if (s.empty() || s.size() > kMaxRank)
    throw std::invalid_argument(std::string(who) + ": rank must be 1.." +
                                std::to_string(kMaxRank) + ", got shape " + shape_str(s));
  for (int d : s)
    if (d < 1)
      throw std::invalid_argument(std::string(who) + ": every extent must be >= 1, got shape " +
                                  shape_str(s));
}

template <typename T>
class Tensor {
  static_assert(std::is_floating_point_v<T>, "Tensor supports float or double");

 public:
  // Default-constructed tensors are empty placeholders; every factory and
  // constructor that takes a shape enforces rank 1..5 with positive extents.
  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    check_shape_valid(shape_, "Tensor");
    data_.assign(shape_numel(shape_), T(0));
  }

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape_valid(shape_, "Tensor");
    if (data_.size() != shape_numel(shape_))
      throw std::invalid_argument("Tensor: data size " + std::to_string(data_.size()) +
                                  " does not match shape " + shape_str(shape_));
  }

  Tensor(Shape shape, std::initializer_list<T> data)
      : Tensor(std::move(shape), std::vector<T>(data)) {}

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, T value) {
    Tensor t(std::move(shape));
    for (T& v : t.data_) v = value;
    return t;
  }

  static Tensor ones(Shape shape) { return full(std::move(shape), T(1)); }

  bool empty() const { return shape_.empty(); }
  int rank() const { return static_cast<int>(shape_.size()); }
  const Shape& shape() const { return shape_; }

  int dim(int axis) const {
    if (axis < 0 || axis >= rank())
      throw std::invalid_argument("Tensor::dim: axis " + std::to_string(axis) +
                                  " out of range for shape " + shape_str(shape_));
    return shape_[axis];
  }

  std::size_t numel() const { return data_.size(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Row-major flat offset of a multi-index; bounds-checked per axis.
  std::size_t flat_index(std::span<const int> idx) const {
    if (static_cast<int>(idx.size()) != rank())
      throw std::invalid_argument("Tensor::flat_index: got " + std::to_string(idx.size()) +
                                  " indices for shape " + shape_str(shape_));
    std::size_t off = 0;
    for (int a = 0; a < rank(); ++a) {
      if (idx[a] < 0 || idx[a] >= shape_[a])
        throw std::invalid_argument("Tensor::flat_index: index " + std::to_string(idx[a]) +
                                    " out of range on axis " + std::to_string(a) + " for shape " +
                                    shape_str(shape_));
      off = off * static_cast<std::size_t>(shape_[a]) + static_cast<std::size_t>(idx[a]);
    }
    return off;
  }

  std::vector<int> unflatten(std::size_t off) const {
    if (off >= numel())
      throw std::invalid_argument("Tensor::unflatten: offset " + std::to_string(off) +
                                  " out of range for shape " + shape_str(shape_));
    std::vector<int> idx(rank());
    for (int a = rank() - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(off % static_cast<std::size_t>(shape_[a]));
      off /= static_cast<std::size_t>(shape_[a]);
    }
    return idx;
  }

  template <typename... I>
  T& at(I... idx) {
    const int ix[] = {static_cast<int>(idx)...};
    return data_[flat_index(std::span<const int>(ix, sizeof...(idx)))];
  }

  template <typename... I>
  const T& at(I... idx) const {
    const int ix[] = {static_cast<int>(idx)...};
    return data_[flat_index(std::span<const int>(ix, sizeof...(idx)))];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(out));
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* who) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(who) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

}  // namespace girnet
