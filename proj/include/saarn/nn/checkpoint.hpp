#pragma once

// Binary checkpoint container:
//
//   "SAARNCKP"                 8-byte magic
//   u32 format_version
//   u32 scalar_bytes           4 (float) or 8 (double)
//   u64 metadata_len, bytes    free-form text (the run's resolved JSON config)
//   u32 parameter_count
//   per parameter:
//     u32 name_len, bytes
//     u32 rank, u64 dims[rank]
//     scalar_bytes * numel     little-endian values
//
// Integers are little-endian. A reader refuses any other format_version.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "saarn/errors.hpp"
#include "saarn/nn/params.hpp"

namespace saarn::nn {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'S', 'A', 'A', 'R', 'N', 'C', 'K', 'P'};

namespace detail {

template <class U>
void put(std::ostream& os, U v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <class U>
U take(std::istream& is) {
  U v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(U));
  if (!is) throw FormatError("checkpoint truncated");
  return v;
}

inline std::string take_string(std::istream& is, std::size_t n) {
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw FormatError("checkpoint truncated");
  return s;
}

inline void read_header(std::istream& is, std::uint32_t& scalar_bytes, std::string& metadata) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw FormatError("not a checkpoint file (bad magic)");
  const auto version = take<std::uint32_t>(is);
  if (version != kCheckpointFormatVersion)
    throw FormatError("checkpoint format version " + std::to_string(version) +
                      " does not match supported version " +
                      std::to_string(kCheckpointFormatVersion));
  scalar_bytes = take<std::uint32_t>(is);
  if (scalar_bytes != 4 && scalar_bytes != 8) throw FormatError("unsupported scalar width");
  metadata = take_string(is, take<std::uint64_t>(is));
}

}  // namespace detail

template <class T>
void save_checkpoint(const std::string& path, const ParameterStore<T>& store,
                     const std::string& metadata) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  os.write(kCheckpointMagic, 8);
  detail::put<std::uint32_t>(os, kCheckpointFormatVersion);
  detail::put<std::uint32_t>(os, sizeof(T));
  detail::put<std::uint64_t>(os, metadata.size());
  os.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(store.all().size()));
  for (const auto& [name, p] : store.all()) {
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(p.rank()));
    for (auto d : p.shape()) detail::put<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(p.data()),
             static_cast<std::streamsize>(p.size() * sizeof(T)));
  }
  if (!os) throw FormatError("write to '" + path + "' failed");
}

inline std::string read_checkpoint_metadata(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint '" + path + "'");
  std::uint32_t scalar_bytes = 0;
  std::string metadata;
  detail::read_header(is, scalar_bytes, metadata);
  return metadata;
}

// Overwrites every parameter of store. The file must hold exactly the same
// names and shapes. Values are converted if the file's scalar width differs.
template <class T>
std::string load_checkpoint(const std::string& path, ParameterStore<T>& store) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint '" + path + "'");
  std::uint32_t scalar_bytes = 0;
  std::string metadata;
  detail::read_header(is, scalar_bytes, metadata);
  const auto count = detail::take<std::uint32_t>(is);
  if (count != store.all().size())
    throw FormatError("checkpoint holds " + std::to_string(count) + " parameters, model has " +
                      std::to_string(store.all().size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = detail::take_string(is, detail::take<std::uint32_t>(is));
    if (!store.contains(name)) throw FormatError("unexpected parameter '" + name + "'");
    auto& p = store.get(name);
    Shape shape(detail::take<std::uint32_t>(is));
    for (auto& d : shape) d = detail::take<std::uint64_t>(is);
    if (shape != p.shape())
      throw FormatError("parameter '" + name + "' has shape " + to_string(shape) +
                        ", model expects " + to_string(p.shape()));
    auto dst = p.mutable_value();
    if (scalar_bytes == sizeof(T)) {
      is.read(reinterpret_cast<char*>(dst.data()), static_cast<std::streamsize>(dst.size() * sizeof(T)));
    } else if (scalar_bytes == 4) {
      std::vector<float> buf(dst.size());
      is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
      for (std::size_t j = 0; j < buf.size(); ++j) dst[j] = static_cast<T>(buf[j]);
    } else {
      std::vector<double> buf(dst.size());
      is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8));
      for (std::size_t j = 0; j < buf.size(); ++j) dst[j] = static_cast<T>(buf[j]);
    }
    if (!is) throw FormatError("checkpoint truncated in '" + name + "'");
  }
  return metadata;
}

}  // namespace saarn::nn
