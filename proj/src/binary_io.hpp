#pragma once

// Little-endian byte packing shared by the FNNW and FEMB formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "stylesearch/errors.hpp"

namespace stylesearch::detail {

class ByteWriter {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f32s(std::span<const float> values) {
    out_.reserve(out_.size() + values.size() * 4);
    for (float v : values) f32(v);
  }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::string what)
      : data_(data), what_(std::move(what)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  void expect_magic(const char (&magic)[5]) {
    need(4, "magic");
    if (std::memcmp(data_.data() + pos_, magic, 4) != 0) {
      throw FormatError(what_ + ": bad magic, expected \"" + std::string(magic, 4) + "\"", pos_);
    }
    pos_ += 4;
  }
  std::uint8_t u8(const char* field) {
    need(1, field);
    return data_[pos_++];
  }
  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* field) {
    need(8, field);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32(const char* field) { return std::bit_cast<float>(u32(field)); }
  void f32s(std::span<float> out, const char* field) {
    if (out.size() > remaining() / 4) need(out.size() * 4, field);
    for (float& v : out) v = f32(field);
  }

  [[noreturn]] void fail(const std::string& message, std::size_t at) const {
    throw FormatError(what_ + ": " + message, at);
  }

 private:
  void need(std::size_t n, const char* field) const {
    if (n > remaining()) {
      throw FormatError(what_ + ": truncated while reading " + field, pos_);
    }
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace stylesearch::detail
