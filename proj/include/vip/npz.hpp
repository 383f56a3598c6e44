#pragma once

// Read-only access to NumPy .npz archives (zip of .npy members, stored or
// deflated). Only what the dataset adapter needs: little-endian numeric
// dtypes in C order, converted to double or byte vectors.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace vip::npz {

struct NpyArray {
  std::string descr;  // e.g. "<f4", "|u1", "|b1"
  std::vector<std::int64_t> shape;
  std::vector<std::uint8_t> data;

  std::int64_t element_count() const;
  std::vector<double> as_double() const;
  std::vector<std::uint8_t> as_u8() const;
};

NpyArray parse_npy(const std::vector<std::uint8_t>& bytes);

// Member name (".npy" suffix stripped) -> array.
std::map<std::string, NpyArray> read_npz(const std::filesystem::path& path);

}  // namespace vip::npz
