#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "stylesearch/rng.hpp"
#include "stylesearch/tensor.hpp"

namespace stylesearch {

// Procedural stand-in for catalog photos: a colored silhouette on a light
// background. Each shape index draws a visibly different silhouette
// (disc, wide bar, tall bar, triangle, ring, cross, repeating after 6);
// color, size, position and noise vary per call.
ImageTensor synthetic_product_image(std::size_t shape_index, Rng& rng, std::size_t height = 80,
                                    std::size_t width = 60);

struct SyntheticClass {
  std::string gender = "Unisex";
  std::string master_category = "Accessories";
  std::string sub_category;
  std::string article_type;
  std::size_t count = 0;
};

struct SyntheticCatalog {
  std::string styles_csv;
  std::string image_dir;
  std::vector<std::uint64_t> ids;
};

// Writes <dir>/styles.csv and <dir>/images/{id}.jpg. Ids start at 1000 and
// follow class order; class i uses shape i. missing_images leaves the last
// that many ids without a JPEG, ragged_rows appends rows with an extra
// unquoted comma.
SyntheticCatalog write_synthetic_catalog(const std::string& dir,
                                         const std::vector<SyntheticClass>& classes,
                                         std::uint64_t seed, std::size_t missing_images = 0,
                                         std::size_t ragged_rows = 0);

}  // namespace stylesearch
