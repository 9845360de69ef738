#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "patrec/tensor.hpp"

// Named-tensor checkpoint container, version 1. Payload bytes round-trip
// exactly; the dtype of the file must match the dtype requested on load.
//
//   magic "PTCK" | u32 version | u32 scalar_size | u32 count
//   per tensor: u32 name_len | name | u32 ndim | i64 dims[] | raw values

namespace patrec::diff {

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_i64(std::ostream& os, std::int64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
inline std::int64_t read_i64(std::istream& is) {
  std::int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

} // namespace detail

inline constexpr char kCheckpointMagic[4] = {'P', 'T', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class S>
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor<S>>>& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  os.write(kCheckpointMagic, 4);
  detail::write_u32(os, kCheckpointVersion);
  detail::write_u32(os, static_cast<std::uint32_t>(sizeof(S)));
  detail::write_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    detail::write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_u32(os, static_cast<std::uint32_t>(t.shape().size()));
    for (int d : t.shape()) detail::write_i64(os, d);
    os.write(reinterpret_cast<const char*>(t.value().data()),
             static_cast<std::streamsize>(t.numel() * sizeof(S)));
  }
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

template <class S>
std::map<std::string, Tensor<S>> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  if (detail::read_u32(is) != kCheckpointVersion)
    throw std::runtime_error("load_checkpoint: unsupported version in " + path);
  if (detail::read_u32(is) != sizeof(S))
    throw std::runtime_error("load_checkpoint: dtype mismatch in " + path);
  const std::uint32_t count = detail::read_u32(is);
  std::map<std::string, Tensor<S>> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t name_len = detail::read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const std::uint32_t ndim = detail::read_u32(is);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(detail::read_i64(is));
    Tensor<S> t = Tensor<S>::zeros(shape);
    is.read(reinterpret_cast<char*>(t.value().data()),
            static_cast<std::streamsize>(t.numel() * sizeof(S)));
    if (!is) throw std::runtime_error("load_checkpoint: truncated file " + path);
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

} // namespace patrec::diff
