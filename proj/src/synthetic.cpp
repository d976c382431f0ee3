#include "stylesearch/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "stylesearch/errors.hpp"
#include "stylesearch/image_io.hpp"

namespace stylesearch {
namespace {

bool inside(std::size_t shape, double u, double v, double size) {
  // u, v are offsets from the silhouette center in pixels.
  const double au = std::abs(u);
  const double av = std::abs(v);
  switch (shape % 6) {
    case 0:
      return u * u + v * v <= size * size;
    case 1:
      return au <= size * 1.3 && av <= size * 0.45;
    case 2:
      return au <= size * 0.45 && av <= size * 1.3;
    case 3:
      return v <= size * 0.9 && v >= -size * 0.9 && au <= (v + size * 0.9) * 0.6;
    case 4: {
      const double r2 = u * u + v * v;
      return r2 <= size * size && r2 >= size * size * 0.36;
    }
    default:
      return (au <= size * 0.3 && av <= size) || (av <= size * 0.3 && au <= size);
  }
}

}  // namespace

ImageTensor synthetic_product_image(std::size_t shape_index, Rng& rng, std::size_t height,
                                    std::size_t width) {
  ImageTensor image(Shape{height, width, 3});
  const double bg = uniform_real(rng, 0.85, 1.0);
  double color[3];
  for (double& c : color) c = uniform_real(rng, 0.05, 0.7);
  const double side = static_cast<double>(std::min(height, width));
  const double size = side * uniform_real(rng, 0.25, 0.35);
  const double cx = static_cast<double>(width) / 2.0 + uniform_real(rng, -0.08, 0.08) * side;
  const double cy = static_cast<double>(height) / 2.0 + uniform_real(rng, -0.08, 0.08) * side;
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const bool on = inside(shape_index, static_cast<double>(x) - cx, static_cast<double>(y) - cy, size);
      for (std::size_t c = 0; c < 3; ++c) {
        const double noise = uniform_real(rng, -0.03, 0.03);
        image.at(y, x, c) = static_cast<float>(std::clamp((on ? color[c] : bg) + noise, 0.0, 1.0));
      }
    }
  }
  return image;
}

SyntheticCatalog write_synthetic_catalog(const std::string& dir,
                                         const std::vector<SyntheticClass>& classes,
                                         std::uint64_t seed, std::size_t missing_images,
                                         std::size_t ragged_rows) {
  namespace fs = std::filesystem;
  SyntheticCatalog out;
  out.styles_csv = (fs::path(dir) / "styles.csv").string();
  out.image_dir = (fs::path(dir) / "images").string();
  fs::create_directories(out.image_dir);
  std::ofstream csv(out.styles_csv, std::ios::trunc);
  if (!csv) throw IoError("cannot write '" + out.styles_csv + "'");
  csv << "id,gender,masterCategory,subCategory,articleType,baseColour,season,year,usage,"
         "productDisplayName\n";
  std::uint64_t id = 1000;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const auto& cls = classes[k];
    for (std::size_t i = 0; i < cls.count; ++i, ++id) {
      csv << id << ',' << cls.gender << ',' << cls.master_category << ',' << cls.sub_category << ','
          << cls.article_type << ",Black,Summer,2012,Casual,\"Synthetic " << cls.article_type
          << " " << i << "\"\n";
      out.ids.push_back(id);
    }
  }
  for (std::size_t r = 0; r < ragged_rows; ++r) {
    csv << id + r << ",Men,Apparel,Topwear,Tshirts,Blue,Fall,2011,Casual,Tee, with comma\n";
  }
  if (!csv) throw IoError("failed writing '" + out.styles_csv + "'");

  const std::size_t with_images = out.ids.size() - std::min(missing_images, out.ids.size());
  std::size_t class_index = 0;
  std::size_t seen = 0;
  for (std::size_t i = 0; i < with_images; ++i) {
    while (seen >= classes[class_index].count) {
      seen = 0;
      ++class_index;
    }
    ++seen;
    Rng rng(derive_seed(seed, out.ids[i]));
    const auto image = synthetic_product_image(class_index, rng);
    write_jpeg(image, (fs::path(out.image_dir) / (std::to_string(out.ids[i]) + ".jpg")).string());
  }
  return out;
}

}  // namespace stylesearch
