#include "stylesearch/image_io.hpp"

// jpeglib.h needs size_t/FILE declared first.
#include <cstdio>
#include <csetjmp>
#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>

#include "stylesearch/errors.hpp"

namespace stylesearch {
namespace {

struct JpegError {
  jpeg_error_mgr manager;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void on_jpeg_error(j_common_ptr info) {
  auto* err = reinterpret_cast<JpegError*>(info->err);
  (*info->err->format_message)(info, err->message);
  std::longjmp(err->jump, 1);
}

void silence_jpeg_warning(j_common_ptr, int) {}

}  // namespace

ImageTensor decode_jpeg(std::span<const std::uint8_t> bytes, const std::string& source_name) {
  if (bytes.size() < 4 || bytes[0] != 0xFF || bytes[1] != 0xD8) {
    throw DecodeError(source_name, "not a JPEG stream");
  }
  jpeg_decompress_struct info{};
  JpegError err{};
  info.err = jpeg_std_error(&err.manager);
  err.manager.error_exit = on_jpeg_error;
  err.manager.emit_message = silence_jpeg_warning;
  std::vector<std::uint8_t> pixels;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&info);
    throw DecodeError(source_name, err.message);
  }
  jpeg_create_decompress(&info);
  jpeg_mem_src(&info, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&info, TRUE);
  if (info.jpeg_color_space == JCS_GRAYSCALE) {
    info.out_color_space = JCS_GRAYSCALE;
  } else {
    info.out_color_space = JCS_RGB;
  }
  jpeg_start_decompress(&info);
  height = info.output_height;
  width = info.output_width;
  channels = static_cast<std::size_t>(info.output_components);
  pixels.resize(height * width * channels);
  while (info.output_scanline < info.output_height) {
    JSAMPROW row = pixels.data() + static_cast<std::size_t>(info.output_scanline) * width * channels;
    jpeg_read_scanlines(&info, &row, 1);
  }
  jpeg_finish_decompress(&info);
  jpeg_destroy_decompress(&info);

  ImageTensor image(Shape{height, width, 3});
  for (std::size_t p = 0; p < height * width; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      const std::uint8_t v = pixels[p * channels + (channels == 1 ? 0 : c)];
      image[p * 3 + c] = static_cast<float>(v) / 255.0f;
    }
  }
  return image;
}

ImageTensor resize_bilinear(const ImageTensor& image, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw ShapeError("resize_bilinear: target size must be positive");
  if (image.empty()) throw ShapeError("resize_bilinear: empty source image");
  if (image.height() == height && image.width() == width) return image;
  const std::size_t channels = image.channels();
  ImageTensor out(Shape{height, width, channels});
  const double sy = static_cast<double>(image.height()) / static_cast<double>(height);
  const double sx = static_cast<double>(image.width()) / static_cast<double>(width);
  const auto max_y = static_cast<double>(image.height() - 1);
  const auto max_x = static_cast<double>(image.width() - 1);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, max_y);
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, image.height() - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, max_x);
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, image.width() - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < channels; ++c) {
        const double top = image.at(y0, x0, c) * (1.0 - wx) + image.at(y0, x1, c) * wx;
        const double bottom = image.at(y1, x0, c) * (1.0 - wx) + image.at(y1, x1, c) * wx;
        out.at(y, x, c) = static_cast<float>(top * (1.0 - wy) + bottom * wy);
      }
    }
  }
  return out;
}

ImageTensor decode_image_bytes(std::span<const std::uint8_t> bytes, std::size_t height,
                               std::size_t width, const std::string& source_name) {
  auto image = resize_bilinear(decode_jpeg(bytes, source_name), height, width);
  for (float& v : image.values()) v = std::clamp(v, 0.0f, 1.0f);
  return image;
}

ImageTensor decode_image(const std::string& path, std::size_t height, std::size_t width) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError(path, "cannot open file");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return decode_image_bytes(bytes, height, width, path);
}

namespace {

// Returns a malloc'd buffer owned by the caller.
unsigned char* compress_rows(const ImageTensor& image, int quality, std::vector<std::uint8_t>& row,
                             unsigned long& size) {
  jpeg_compress_struct info{};
  JpegError err{};
  info.err = jpeg_std_error(&err.manager);
  err.manager.error_exit = on_jpeg_error;
  unsigned char* buffer = nullptr;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&info);
    std::free(buffer);
    throw DecodeError("<encoder>", err.message);
  }
  jpeg_create_compress(&info);
  jpeg_mem_dest(&info, &buffer, &size);
  info.image_width = static_cast<JDIMENSION>(image.width());
  info.image_height = static_cast<JDIMENSION>(image.height());
  info.input_components = static_cast<int>(image.channels());
  info.in_color_space = image.channels() == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_set_defaults(&info);
  jpeg_set_quality(&info, quality, TRUE);
  jpeg_start_compress(&info, TRUE);
  while (info.next_scanline < info.image_height) {
    const float* src = image.data() + image.index(info.next_scanline, 0, 0);
    for (std::size_t i = 0; i < row.size(); ++i) {
      row[i] = static_cast<std::uint8_t>(std::lround(std::clamp(src[i], 0.0f, 1.0f) * 255.0f));
    }
    JSAMPROW ptr = row.data();
    jpeg_write_scanlines(&info, &ptr, 1);
  }
  jpeg_finish_compress(&info);
  jpeg_destroy_compress(&info);
  return buffer;
}

}  // namespace

std::vector<std::uint8_t> encode_jpeg(const ImageTensor& image, int quality) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw ShapeError("encode_jpeg: expected 1 or 3 channels, got " + std::to_string(image.channels()));
  }
  if (image.empty()) throw ShapeError("encode_jpeg: empty image");
  std::vector<std::uint8_t> row(image.width() * image.channels());
  unsigned long size = 0;
  unsigned char* buffer = compress_rows(image, quality, row, size);
  std::vector<std::uint8_t> out(buffer, buffer + size);
  std::free(buffer);
  return out;
}

void write_jpeg(const ImageTensor& image, const std::string& path, int quality) {
  const auto bytes = encode_jpeg(image, quality);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write image '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing image '" + path + "'");
}

}  // namespace stylesearch
