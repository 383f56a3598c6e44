#pragma once

// Canonical tensor files: `<stem>.bin` holds raw little-endian row-major data
// and `<stem>.json` is the sidecar {"dtype": "f32"|"u8"|"bool", "shape": [...]}.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace vip {

enum class DType { f32, u8, boolean };

std::string to_string(DType d);
DType dtype_from_string(const std::string& s);
std::size_t dtype_size(DType d);

struct RawArray {
  DType dtype = DType::f32;
  std::vector<std::int64_t> shape;
  std::vector<std::uint8_t> bytes;

  std::int64_t element_count() const;
  std::vector<float> as_f32() const;
  std::vector<std::uint8_t> as_u8() const;
  std::vector<bool> as_bool() const;
};

RawArray make_f32(std::vector<std::int64_t> shape, const std::vector<float>& values);
RawArray make_u8(std::vector<std::int64_t> shape, std::vector<std::uint8_t> values);
RawArray make_bool(std::vector<std::int64_t> shape, const std::vector<bool>& values);

void write_array(const std::filesystem::path& dir, const std::string& stem, const RawArray& a);

// Throws FormatError when the sidecar is malformed or the payload size does
// not match the declared shape.
RawArray read_array(const std::filesystem::path& dir, const std::string& stem);

}  // namespace vip
