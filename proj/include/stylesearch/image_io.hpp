#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stylesearch/tensor.hpp"

namespace stylesearch {

// Catalog images are resized to this square before entering any network:
// three 2x poolings then land exactly on 8x8.
inline constexpr std::size_t kImageSide = 64;

// Decodes a JPEG at its native size into a 3-channel tensor in [0, 1].
// Grayscale sources are replicated across channels.
ImageTensor decode_jpeg(std::span<const std::uint8_t> bytes, const std::string& source_name);

// Bilinear resize with half-pixel centers and edge clamping.
ImageTensor resize_bilinear(const ImageTensor& image, std::size_t height, std::size_t width);

ImageTensor decode_image_bytes(std::span<const std::uint8_t> bytes, std::size_t height = kImageSide,
                               std::size_t width = kImageSide,
                               const std::string& source_name = "<memory>");
ImageTensor decode_image(const std::string& path, std::size_t height = kImageSide,
                         std::size_t width = kImageSide);

// Values are clamped to [0, 1] and rounded to 8 bits. 1- and 3-channel
// tensors are accepted.
std::vector<std::uint8_t> encode_jpeg(const ImageTensor& image, int quality = 95);
void write_jpeg(const ImageTensor& image, const std::string& path, int quality = 95);

}  // namespace stylesearch
