#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "concertcut/core/error.hpp"

namespace concertcut::io {

// On-disk layout, all integers little-endian:
//   "TEN1" | u32 version | u32 ndim | ndim x u32 dims | float32 payload
inline constexpr char kTensorMagic[4] = {'T', 'E', 'N', '1'};
inline constexpr std::uint32_t kTensorVersion = 1;

struct TensorData {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  std::size_t numel() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }

  friend bool operator==(const TensorData&, const TensorData&) = default;
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw DataFormatError("unexpected end of file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& os, float f) { put_u32(os, std::bit_cast<std::uint32_t>(f)); }

}  // namespace detail

inline void write_tensor(std::ostream& os, const TensorData& t) {
  if (t.values.size() != t.numel()) {
    throw DimensionError("tensor payload does not match dims");
  }
  os.write(kTensorMagic, 4);
  detail::put_u32(os, kTensorVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(t.dims.size()));
  for (auto d : t.dims) detail::put_u32(os, d);
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(t.values.data()),
             static_cast<std::streamsize>(t.values.size() * sizeof(float)));
  } else {
    for (float f : t.values) detail::put_f32(os, f);
  }
  if (!os) throw DataFormatError("failed writing tensor");
}

inline TensorData read_tensor(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kTensorMagic, 4) != 0) {
    throw DataFormatError("not a TEN1 tensor stream");
  }
  const auto version = detail::get_u32(is);
  if (version != kTensorVersion) {
    throw DataFormatError("unsupported tensor version " + std::to_string(version));
  }
  TensorData t;
  const auto ndim = detail::get_u32(is);
  if (ndim > 16) throw DataFormatError("implausible tensor rank");
  t.dims.resize(ndim);
  for (auto& d : t.dims) d = detail::get_u32(is);
  const std::size_t n = t.numel();
  t.values.resize(n);
  if constexpr (std::endian::native == std::endian::little) {
    if (!is.read(reinterpret_cast<char*>(t.values.data()),
                 static_cast<std::streamsize>(n * sizeof(float)))) {
      throw DataFormatError("truncated tensor payload");
    }
  } else {
    for (auto& f : t.values) f = std::bit_cast<float>(detail::get_u32(is));
  }
  return t;
}

// Writes to a sibling temp file first, then renames into place.
template <class Writer>
void write_atomically(const std::filesystem::path& path, Writer&& writer) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataFormatError("cannot open " + tmp.string() + " for writing");
    writer(os);
    os.flush();
    if (!os) throw DataFormatError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void save_tensor(const std::filesystem::path& path, const TensorData& t) {
  write_atomically(path, [&](std::ostream& os) { write_tensor(os, t); });
}

inline TensorData load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataFormatError("cannot open " + path.string());
  return read_tensor(is);
}

}  // namespace concertcut::io
