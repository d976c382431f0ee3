#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stylesearch/errors.hpp"

namespace stylesearch {

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t size() const { return height * width * channels; }
  std::string to_string() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

// Dense (height, width, channels) array stored row-major with channels
// innermost. Vectors are represented as 1 x 1 x n tensors.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T{0}) : shape_(shape), values_(shape.size(), fill) {}
  BasicTensor(Shape shape, std::vector<T> values) : shape_(shape), values_(std::move(values)) {
    if (values_.size() != shape_.size()) {
      throw ShapeError("tensor of shape " + shape_.to_string() + " needs " +
                       std::to_string(shape_.size()) + " values, got " +
                       std::to_string(values_.size()));
    }
  }

  static BasicTensor vector(std::vector<T> values) {
    const Shape s{1, 1, values.size()};
    return BasicTensor(s, std::move(values));
  }

  const Shape& shape() const { return shape_; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::size_t index(std::size_t h, std::size_t w, std::size_t c) const {
    return (h * shape_.width + w) * shape_.channels + c;
  }
  T& at(std::size_t h, std::size_t w, std::size_t c) { return values_[index(h, w, c)]; }
  const T& at(std::size_t h, std::size_t w, std::size_t c) const { return values_[index(h, w, c)]; }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }
  std::vector<T>& storage() { return values_; }
  const std::vector<T>& storage() const { return values_; }

  // Same values viewed under another shape with an equal element count.
  BasicTensor reshaped(Shape shape) const { return BasicTensor(shape, values_); }

  template <typename U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape_, std::vector<U>(values_.begin(), values_.end()));
  }

  bool all_finite() const;

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  Shape shape_;
  std::vector<T> values_;
};

using Tensor = BasicTensor<float>;
// Image intensities in [0, 1]; same storage as any other tensor.
using ImageTensor = Tensor;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace stylesearch
