#include "vip/array_io.hpp"

#include "vip/types.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

namespace vip {

static_assert(std::endian::native == std::endian::little, "raw array IO assumes a little-endian host");

std::string to_string(DType d) {
  switch (d) {
    case DType::f32:
      return "f32";
    case DType::u8:
      return "u8";
    case DType::boolean:
      return "bool";
  }
  return "?";
}

DType dtype_from_string(const std::string& s) {
  if (s == "f32") return DType::f32;
  if (s == "u8") return DType::u8;
  if (s == "bool") return DType::boolean;
  throw FormatError("unknown dtype '" + s + "'");
}

std::size_t dtype_size(DType d) { return d == DType::f32 ? 4 : 1; }

std::int64_t RawArray::element_count() const {
  std::int64_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

std::vector<float> RawArray::as_f32() const {
  if (dtype != DType::f32) throw FormatError("expected f32 array, got " + to_string(dtype));
  std::vector<float> out(static_cast<std::size_t>(element_count()));
  std::memcpy(out.data(), bytes.data(), out.size() * sizeof(float));
  return out;
}

std::vector<std::uint8_t> RawArray::as_u8() const {
  if (dtype != DType::u8) throw FormatError("expected u8 array, got " + to_string(dtype));
  return bytes;
}

std::vector<bool> RawArray::as_bool() const {
  if (dtype != DType::boolean) throw FormatError("expected bool array, got " + to_string(dtype));
  std::vector<bool> out(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) out[i] = bytes[i] != 0;
  return out;
}

RawArray make_f32(std::vector<std::int64_t> shape, const std::vector<float>& values) {
  RawArray a{DType::f32, std::move(shape), {}};
  a.bytes.resize(values.size() * sizeof(float));
  std::memcpy(a.bytes.data(), values.data(), a.bytes.size());
  return a;
}

RawArray make_u8(std::vector<std::int64_t> shape, std::vector<std::uint8_t> values) {
  return RawArray{DType::u8, std::move(shape), std::move(values)};
}

RawArray make_bool(std::vector<std::int64_t> shape, const std::vector<bool>& values) {
  RawArray a{DType::boolean, std::move(shape), {}};
  a.bytes.reserve(values.size());
  for (bool b : values) a.bytes.push_back(b ? 1 : 0);
  return a;
}

void write_array(const std::filesystem::path& dir, const std::string& stem, const RawArray& a) {
  if (static_cast<std::int64_t>(a.bytes.size()) != a.element_count() * static_cast<std::int64_t>(dtype_size(a.dtype)))
    throw std::logic_error("array '" + stem + "' payload does not match its shape");
  {
    std::ofstream bin(dir / (stem + ".bin"), std::ios::binary | std::ios::trunc);
    if (!bin) throw std::runtime_error("cannot write " + (dir / (stem + ".bin")).string());
    bin.write(reinterpret_cast<const char*>(a.bytes.data()), static_cast<std::streamsize>(a.bytes.size()));
  }
  nlohmann::json side;
  side["dtype"] = to_string(a.dtype);
  side["shape"] = a.shape;
  std::ofstream js(dir / (stem + ".json"), std::ios::trunc);
  js << side.dump() << "\n";
}

RawArray read_array(const std::filesystem::path& dir, const std::string& stem) {
  const auto side_path = dir / (stem + ".json");
  const auto bin_path = dir / (stem + ".bin");
  std::ifstream js(side_path);
  if (!js) throw FormatError("missing sidecar " + side_path.string());
  nlohmann::json side;
  try {
    js >> side;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed sidecar " + side_path.string() + ": " + e.what());
  }
  if (!side.contains("dtype") || !side.contains("shape") || !side["shape"].is_array())
    throw FormatError("sidecar " + side_path.string() + " lacks dtype/shape");

  RawArray a;
  a.dtype = dtype_from_string(side["dtype"].get<std::string>());
  for (const auto& d : side["shape"]) {
    if (!d.is_number_integer() || d.get<std::int64_t>() < 0) throw FormatError("bad shape in " + side_path.string());
    a.shape.push_back(d.get<std::int64_t>());
  }
  std::ifstream bin(bin_path, std::ios::binary | std::ios::ate);
  if (!bin) throw FormatError("missing array file " + bin_path.string());
  const auto size = static_cast<std::int64_t>(bin.tellg());
  const std::int64_t expected = a.element_count() * static_cast<std::int64_t>(dtype_size(a.dtype));
  if (size != expected) {
    throw FormatError("array " + stem + ": file holds " + std::to_string(size) + " bytes but shape declares " +
                      std::to_string(expected));
  }
  a.bytes.resize(static_cast<std::size_t>(size));
  bin.seekg(0);
  bin.read(reinterpret_cast<char*>(a.bytes.data()), size);
  return a;
}

}  // namespace vip
