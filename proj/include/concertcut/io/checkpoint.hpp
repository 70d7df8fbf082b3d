#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "concertcut/io/tensor_file.hpp"
#include "concertcut/tensor/nn.hpp"

namespace concertcut::io {

// "CKPT" | u32 version | u32 header_len | JSON header | u32 count |
// count x (u32 name_len | name | TEN1 tensor)
inline constexpr char kCheckpointMagic[4] = {'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json header;
  std::vector<std::pair<std::string, TensorData>> tensors;

  const TensorData& tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
      if (n == name) return t;
    }
    throw DataFormatError("checkpoint has no tensor '" + name + "'");
  }
};

inline TensorData to_tensor_data(const Tensor& t) {
  TensorData out;
  for (auto d : t.shape()) out.dims.push_back(static_cast<std::uint32_t>(d));
  out.values.assign(t.data().begin(), t.data().end());
  return out;
}

inline Checkpoint make_checkpoint(nlohmann::json header, const ParameterSet& params) {
  Checkpoint c;
  c.header = std::move(header);
  for (const auto& [name, t] : params.entries()) c.tensors.emplace_back(name, to_tensor_data(t));
  return c;
}

// Copies checkpoint values into an already-constructed parameter set with
// matching names and shapes.
inline void load_parameters(const Checkpoint& c, ParameterSet& params) {
  for (auto& [name, t] : params.entries()) {
    const auto& src = c.tensor(name);
    if (src.numel() != t.numel()) {
      throw DataFormatError("checkpoint tensor '" + name + "' has wrong size");
    }
    auto d = t.mutable_data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<double>(src.values[i]);
  }
}

inline void write_checkpoint(std::ostream& os, const Checkpoint& c) {
  os.write(kCheckpointMagic, 4);
  detail::put_u32(os, kCheckpointVersion);
  const std::string header = c.header.dump();
  detail::put_u32(os, static_cast<std::uint32_t>(header.size()));
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  detail::put_u32(os, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& [name, t] : c.tensors) {
    detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(os, t);
  }
}

inline Checkpoint read_checkpoint(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw DataFormatError("not a CKPT checkpoint");
  }
  const auto version = detail::get_u32(is);
  if (version != kCheckpointVersion) {
    throw DataFormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  const auto hlen = detail::get_u32(is);
  std::string header(hlen, '\0');
  if (!is.read(header.data(), hlen)) throw DataFormatError("truncated checkpoint header");
  try {
    c.header = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw DataFormatError(std::string("bad checkpoint header: ") + e.what());
  }
  const auto count = detail::get_u32(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto nlen = detail::get_u32(is);
    std::string name(nlen, '\0');
    if (!is.read(name.data(), nlen)) throw DataFormatError("truncated tensor name");
    c.tensors.emplace_back(std::move(name), read_tensor(is));
  }
  return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  write_atomically(path, [&](std::ostream& os) { write_checkpoint(os, c); });
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataFormatError("cannot open " + path.string());
  return read_checkpoint(is);
}

}  // namespace concertcut::io
