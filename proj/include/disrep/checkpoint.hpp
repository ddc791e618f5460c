#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "disrep/errors.hpp"
#include "disrep/types.hpp"

namespace disrep {

/// Versioned container shared by model checkpoints and oracle classifiers.
///
/// Byte layout (all integers little-endian):
///   8  bytes  magic "DISREPCK"
///   u32       format version
///   u64       manifest length, then that many bytes of UTF-8 "key: value\n" lines
///   u32       array count, then per array:
///             u32 name length, name bytes, u8 element size (4 = f32, 8 = f64),
///             u32 rows, u32 cols, rows*cols elements in column-major order
struct Container {
  static constexpr uint32_t kFormatVersion = 1;

  struct Array {
    std::string name;
    uint8_t element_size = 4;
    uint32_t rows = 0;
    uint32_t cols = 0;
    std::vector<uint8_t> bytes;
  };

  uint32_t version = kFormatVersion;
  std::vector<std::pair<std::string, std::string>> manifest;
  std::vector<Array> arrays;

  const std::string& get(const std::string& key) const;
  bool has(const std::string& key) const;
  const Array& array(const std::string& name) const;

  template <typename Scalar>
  void put(const std::string& name, const Mat<Scalar>& m) {
    Array a;
    a.name = name;
    a.element_size = sizeof(Scalar);
    a.rows = static_cast<uint32_t>(m.rows());
    a.cols = static_cast<uint32_t>(m.cols());
    a.bytes.resize(sizeof(Scalar) * static_cast<size_t>(m.size()));
    std::memcpy(a.bytes.data(), m.data(), a.bytes.size());
    arrays.push_back(std::move(a));
  }

  /// Copies the named array into `m`, whose shape must already match.
  template <typename Scalar>
  void take(const std::string& name, Mat<Scalar>& m) const;
};

std::vector<uint8_t> encode_container(const Container& c);
Container decode_container(std::span<const uint8_t> bytes);

void save_container(const Container& c, const std::filesystem::path& path);
Container load_container(const std::filesystem::path& path);

template <typename Scalar>
void Container::take(const std::string& name, Mat<Scalar>& m) const {
  const Array& a = array(name);
  if (a.element_size != sizeof(Scalar))
    throw LoadError("checkpoint: array '" + name + "' has element size " + std::to_string(a.element_size));
  if (a.rows != m.rows() || a.cols != m.cols())
    throw LoadError("checkpoint: array '" + name + "' is " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                    ", expected " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  std::memcpy(m.data(), a.bytes.data(), a.bytes.size());
}

}  // namespace disrep
