#include "vip/npz.hpp"

#include "vip/types.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <iterator>

namespace vip::npz {
namespace {

std::uint16_t le16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<std::uint8_t> inflate_raw(const std::uint8_t* src, std::size_t n, std::size_t out_size) {
  std::vector<std::uint8_t> out(out_size);
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw FormatError("npz: inflateInit failed");
  zs.next_in = const_cast<Bytef*>(src);
  zs.avail_in = static_cast<uInt>(n);
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || zs.total_out != out_size) throw FormatError("npz: corrupt deflate stream");
  return out;
}

std::size_t descr_size(const std::string& d) {
  if (d.size() < 3) throw FormatError("npy: bad descr " + d);
  return static_cast<std::size_t>(std::stoul(d.substr(2)));
}

// Extracts the value text following 'key': in a Python dict literal.
std::string dict_value(const std::string& header, const std::string& key) {
  const auto k = header.find("'" + key + "'");
  if (k == std::string::npos) throw FormatError("npy header lacks " + key);
  auto p = header.find(':', k);
  if (p == std::string::npos) throw FormatError("npy header malformed");
  ++p;
  while (p < header.size() && header[p] == ' ') ++p;
  if (header[p] == '\'') {
    const auto e = header.find('\'', p + 1);
    return header.substr(p + 1, e - p - 1);
  }
  if (header[p] == '(') {
    const auto e = header.find(')', p);
    return header.substr(p + 1, e - p - 1);
  }
  const auto e = header.find_first_of(",}", p);
  return header.substr(p, e - p);
}

}  // namespace

std::int64_t NpyArray::element_count() const {
  std::int64_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

std::vector<double> NpyArray::as_double() const {
  const std::size_t n = static_cast<std::size_t>(element_count());
  std::vector<double> out(n);
  const char kind = descr[1];
  const std::size_t sz = descr_size(descr);
  if (descr[0] == '>') throw FormatError("npy: big-endian arrays are not supported");
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* p = data.data() + i * sz;
    double v = 0;
    if (kind == 'f' && sz == 4) {
      float f;
      std::memcpy(&f, p, 4);
      v = f;
    } else if (kind == 'f' && sz == 8) {
      std::memcpy(&v, p, 8);
    } else if (kind == 'i' && sz == 8) {
      std::int64_t x;
      std::memcpy(&x, p, 8);
      v = static_cast<double>(x);
    } else if (kind == 'i' && sz == 4) {
      std::int32_t x;
      std::memcpy(&x, p, 4);
      v = x;
    } else if ((kind == 'u' || kind == 'b') && sz == 1) {
      v = p[0];
    } else {
      throw FormatError("npy: unsupported dtype " + descr);
    }
    out[i] = v;
  }
  return out;
}

std::vector<std::uint8_t> NpyArray::as_u8() const {
  if (descr_size(descr) != 1) throw FormatError("npy: expected a byte array, got " + descr);
  return data;
}

NpyArray parse_npy(const std::vector<std::uint8_t>& bytes) {
  static const char kMagic[] = "\x93NUMPY";
  if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic, 6) != 0) throw FormatError("npy: bad magic");
  const int major = bytes[6];
  std::size_t header_len = 0, offset = 0;
  if (major == 1) {
    header_len = le16(bytes.data() + 8);
    offset = 10;
  } else {
    header_len = le32(bytes.data() + 8);
    offset = 12;
  }
  if (offset + header_len > bytes.size()) throw FormatError("npy: truncated header");
  const std::string header(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                           bytes.begin() + static_cast<std::ptrdiff_t>(offset + header_len));

  NpyArray a;
  a.descr = dict_value(header, "descr");
  if (dict_value(header, "fortran_order").find("True") != std::string::npos)
    throw FormatError("npy: Fortran-ordered arrays are not supported");
  const std::string shape = dict_value(header, "shape");
  std::size_t p = 0;
  while (p < shape.size()) {
    while (p < shape.size() && (shape[p] == ' ' || shape[p] == ',')) ++p;
    if (p >= shape.size()) break;
    std::size_t used = 0;
    a.shape.push_back(std::stoll(shape.substr(p), &used));
    p += used;
  }
  const std::size_t payload = static_cast<std::size_t>(a.element_count()) * descr_size(a.descr);
  const std::size_t start = offset + header_len;
  if (start + payload > bytes.size()) throw FormatError("npy: payload shorter than declared shape");
  a.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                bytes.begin() + static_cast<std::ptrdiff_t>(start + payload));
  return a;
}

std::map<std::string, NpyArray> read_npz(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 22) throw FormatError("npz: file too small");

  // End of central directory record, searched backwards past any comment.
  std::size_t eocd = std::string::npos;
  for (std::size_t i = buf.size() - 22 + 1; i-- > 0;) {
    if (le32(buf.data() + i) == 0x06054b50u) {
      eocd = i;
      break;
    }
  }
  if (eocd == std::string::npos) throw FormatError("npz: no end-of-central-directory record");
  const std::size_t entries = le16(buf.data() + eocd + 10);
  std::size_t cd = le32(buf.data() + eocd + 16);
  if (cd == 0xffffffffu) throw FormatError("npz: zip64 archives are not supported");

  std::map<std::string, NpyArray> out;
  for (std::size_t e = 0; e < entries; ++e) {
    if (cd + 46 > buf.size() || le32(buf.data() + cd) != 0x02014b50u) throw FormatError("npz: bad central directory");
    const std::uint16_t method = le16(buf.data() + cd + 10);
    const std::uint32_t csize = le32(buf.data() + cd + 20);
    const std::uint32_t usize = le32(buf.data() + cd + 24);
    const std::uint16_t name_len = le16(buf.data() + cd + 28);
    const std::uint16_t extra_len = le16(buf.data() + cd + 30);
    const std::uint16_t comment_len = le16(buf.data() + cd + 32);
    const std::uint32_t local = le32(buf.data() + cd + 42);
    std::string name(reinterpret_cast<const char*>(buf.data() + cd + 46), name_len);
    cd += 46u + name_len + extra_len + comment_len;

    if (local + 30 > buf.size() || le32(buf.data() + local) != 0x04034b50u) throw FormatError("npz: bad local header");
    const std::size_t data_off = local + 30u + le16(buf.data() + local + 26) + le16(buf.data() + local + 28);
    if (data_off + csize > buf.size()) throw FormatError("npz: member " + name + " truncated");

    std::vector<std::uint8_t> member;
    if (method == 0) {
      member.assign(buf.begin() + static_cast<std::ptrdiff_t>(data_off),
                    buf.begin() + static_cast<std::ptrdiff_t>(data_off + csize));
    } else if (method == 8) {
      member = inflate_raw(buf.data() + data_off, csize, usize);
    } else {
      throw FormatError("npz: unsupported compression method " + std::to_string(method));
    }
    if (name.size() > 4 && name.ends_with(".npy")) name.resize(name.size() - 4);
    out.emplace(name, parse_npy(member));
  }
  return out;
}

}  // namespace vip::npz
