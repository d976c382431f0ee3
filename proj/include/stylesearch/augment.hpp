#pragma once

#include "stylesearch/rng.hpp"
#include "stylesearch/tensor.hpp"

namespace stylesearch {

struct AugmentConfig {
  double rotation_max_deg = 15.0;
  double horizontal_flip_prob = 0.5;
  double shift_fraction = 0.1;
  // Zoom scale is drawn from [1 - zoom_range, 1 + zoom_range].
  double zoom_range = 0.1;

  static AugmentConfig none() { return AugmentConfig{0.0, 0.0, 0.0, 0.0}; }
  bool is_identity() const {
    return rotation_max_deg == 0.0 && horizontal_flip_prob == 0.0 && shift_fraction == 0.0 &&
           zoom_range == 0.0;
  }
  // Throws ContractError for out-of-range fields.
  void validate() const;
};

// Random rotation, horizontal flip, shift and zoom about the image center,
// applied in that order as one bilinear resampling with edge-replicate fill.
// Output has the input's shape and lies in [0, 1].
ImageTensor augment(const ImageTensor& image, const AugmentConfig& config, Rng& rng);

}  // namespace stylesearch
