#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace stylesearch {

// Dimension or layout disagreement between tensors, layers, or vectors.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A caller violated a documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file contents. The offset is the byte position (or row number
// for text formats) where parsing gave up.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}

  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_ = 0;
};

class DecodeError : public std::runtime_error {
 public:
  DecodeError(const std::string& path, const std::string& reason)
      : std::runtime_error("cannot decode image '" + path + "': " + reason), path_(path) {}

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace stylesearch
