#include "stylesearch/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stylesearch/errors.hpp"

namespace stylesearch {

void AugmentConfig::validate() const {
  auto bad = [](const char* field) {
    throw ContractError(std::string("AugmentConfig: ") + field + " out of range");
  };
  if (!(rotation_max_deg >= 0.0) || !std::isfinite(rotation_max_deg)) bad("rotation_max_deg");
  if (!(horizontal_flip_prob >= 0.0 && horizontal_flip_prob <= 1.0)) bad("horizontal_flip_prob");
  if (!(shift_fraction >= 0.0 && shift_fraction < 1.0)) bad("shift_fraction");
  if (!(zoom_range >= 0.0 && zoom_range < 1.0)) bad("zoom_range");
}

ImageTensor augment(const ImageTensor& image, const AugmentConfig& config, Rng& rng) {
  config.validate();
  const std::size_t height = image.height();
  const std::size_t width = image.width();
  const std::size_t channels = image.channels();
  if (image.empty()) return image;

  double angle = 0.0;
  if (config.rotation_max_deg > 0.0) {
    angle = uniform_real(rng, -config.rotation_max_deg, config.rotation_max_deg) *
            std::numbers::pi / 180.0;
  }
  bool flip = false;
  if (config.horizontal_flip_prob > 0.0) flip = unit_real(rng) < config.horizontal_flip_prob;
  double dx = 0.0;
  double dy = 0.0;
  if (config.shift_fraction > 0.0) {
    dx = uniform_real(rng, -config.shift_fraction, config.shift_fraction) * static_cast<double>(width);
    dy = uniform_real(rng, -config.shift_fraction, config.shift_fraction) * static_cast<double>(height);
  }
  double scale = 1.0;
  if (config.zoom_range > 0.0) scale = uniform_real(rng, 1.0 - config.zoom_range, 1.0 + config.zoom_range);

  const double cx = (static_cast<double>(width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(height) - 1.0) / 2.0;
  const double cos_a = angle == 0.0 ? 1.0 : std::cos(angle);
  const double sin_a = angle == 0.0 ? 0.0 : std::sin(angle);
  const double max_x = static_cast<double>(width) - 1.0;
  const double max_y = static_cast<double>(height) - 1.0;

  ImageTensor out(image.shape());
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      // Undo zoom, shift, flip, rotation in reverse order of application.
      double u = (static_cast<double>(x) - cx) / scale - dx;
      double v = (static_cast<double>(y) - cy) / scale - dy;
      if (flip) u = -u;
      const double su = cos_a * u + sin_a * v;
      const double sv = -sin_a * u + cos_a * v;
      const double fx = std::clamp(su + cx, 0.0, max_x);
      const double fy = std::clamp(sv + cy, 0.0, max_y);
      const auto x0 = static_cast<std::size_t>(fx);
      const auto y0 = static_cast<std::size_t>(fy);
      const std::size_t x1 = std::min(x0 + 1, width - 1);
      const std::size_t y1 = std::min(y0 + 1, height - 1);
      const double wx = fx - static_cast<double>(x0);
      const double wy = fy - static_cast<double>(y0);
      for (std::size_t c = 0; c < channels; ++c) {
        double value;
        if (wx == 0.0 && wy == 0.0) {
          value = image.at(y0, x0, c);
        } else {
          const double top = image.at(y0, x0, c) * (1.0 - wx) + image.at(y0, x1, c) * wx;
          const double bottom = image.at(y1, x0, c) * (1.0 - wx) + image.at(y1, x1, c) * wx;
          value = top * (1.0 - wy) + bottom * wy;
        }
        out.at(y, x, c) = static_cast<float>(std::clamp(value, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace stylesearch
