#include "stylesearch/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace stylesearch {

std::string Shape::to_string() const {
  return "(" + std::to_string(height) + ", " + std::to_string(width) + ", " +
         std::to_string(channels) + ")";
}

template <typename T>
bool BasicTensor<T>::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace stylesearch
