#pragma once

// Binary checkpoint: "DARSDCKP", u32 version, then until end of file a
// sequence of blobs, each
//   u32 name length, name bytes, u32 rank, rank x u64 dims, f64 payload
// with every integer and float little-endian.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "darsd/networks.hpp"

namespace darsd {

inline constexpr std::array<char, 8> kCheckpointMagic{'D', 'A', 'R', 'S', 'D', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
bool get_le(std::istream& in, T& value) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) return false;
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  std::memcpy(&value, bytes.data(), sizeof(T));
  return true;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const ParamList& params) {
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put_le(out, kCheckpointVersion);
  for (const auto& p : params) {
    detail::put_le(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    detail::put_le(out, static_cast<std::uint32_t>(p.value.rank()));
    for (auto dim : p.value.shape()) detail::put_le(out, static_cast<std::uint64_t>(dim));
    for (double v : p.value.data()) detail::put_le(out, v);
  }
  if (!out) throw CheckpointError("checkpoint write failed");
}

inline void save_checkpoint(const std::string& path, const ParamList& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path + " for writing");
  write_checkpoint(out, params);
}

inline ParamList read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic) {
    throw CheckpointError("not a checkpoint: bad magic bytes");
  }
  std::uint32_t version = 0;
  if (!detail::get_le(in, version) || version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  ParamList out;
  for (;;) {
    std::uint32_t name_len = 0;
    if (!detail::get_le(in, name_len)) break;
    if (name_len > 4096) throw CheckpointError("corrupt checkpoint: name too long");
    std::string name(name_len, '\0');
    std::uint32_t rank = 0;
    if (!in.read(name.data(), name_len) || !detail::get_le(in, rank) || rank > 8) {
      throw CheckpointError("corrupt checkpoint: truncated header for blob '" + name + "'");
    }
    Shape shape(rank);
    for (auto& dim : shape) {
      std::uint64_t d = 0;
      if (!detail::get_le(in, d)) throw CheckpointError("corrupt checkpoint: truncated shape");
      dim = static_cast<std::size_t>(d);
    }
    std::vector<double> values(shape_size(shape));
    for (double& v : values) {
      if (!detail::get_le(in, v)) {
        throw CheckpointError("corrupt checkpoint: truncated payload for '" + name + "'");
      }
    }
    out.push_back({name, Tensor(std::move(shape), std::move(values))});
  }
  return out;
}

inline ParamList load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  return read_checkpoint(in);
}

inline const Tensor& find_param(const ParamList& params, const std::string& name) {
  for (const auto& p : params)
    if (p.name == name) return p.value;
  throw CheckpointError("checkpoint has no blob named '" + name + "'");
}

}  // namespace darsd
