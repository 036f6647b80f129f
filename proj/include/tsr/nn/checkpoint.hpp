#pragma once

// Checkpoint file layout (all integers u32 little-endian):
//   "TSR1" | count | count x { name_len | name (UTF-8) | rank | dims[rank] | f32 values }

#include "tsr/nn/param.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace tsr::nn {

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

namespace io {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

inline void put_u16(std::ostream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  os.write(b, 2);
}

inline void put_f32(std::ostream& os, float f) { put_u32(os, std::bit_cast<std::uint32_t>(f)); }

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError("unexpected end of file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  if (!is.read(reinterpret_cast<char*>(b), 2)) throw FormatError("unexpected end of file");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }

inline void expect_magic(std::istream& is, const char (&magic)[5]) {
  char m[4];
  if (!is.read(m, 4) || std::memcmp(m, magic, 4) != 0)
    throw FormatError(std::string("bad magic, expected ") + magic);
}

}  // namespace io

inline void write_tensors(std::ostream& os, const std::vector<NamedTensor>& tensors) {
  os.write("TSR1", 4);
  io::put_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    io::put_u32(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    io::put_u32(os, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) io::put_u32(os, d);
    for (float v : t.data) io::put_f32(os, v);
  }
}

inline std::vector<NamedTensor> read_tensors(std::istream& is) {
  io::expect_magic(is, "TSR1");
  const std::uint32_t count = io::get_u32(is);
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor t;
    const std::uint32_t len = io::get_u32(is);
    if (len > (1u << 16)) throw FormatError("tensor name too long");
    t.name.resize(len);
    if (!is.read(t.name.data(), len)) throw FormatError("unexpected end of file in tensor name");
    const std::uint32_t rank = io::get_u32(is);
    if (rank > 8) throw FormatError("tensor rank too large: " + std::to_string(rank));
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.dims.push_back(io::get_u32(is));
      n *= t.dims.back();
    }
    if (n > (std::size_t{1} << 32)) throw FormatError("tensor too large");
    t.data.resize(n);
    for (auto& v : t.data) v = io::get_f32(is);
    out.push_back(std::move(t));
  }
  return out;
}

inline void save_tensors(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_tensors(os, tensors);
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline std::vector<NamedTensor> load_tensors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  return read_tensors(is);
}

template <typename S>
std::vector<NamedTensor> to_tensors(const ParamSet<S>& params) {
  std::vector<NamedTensor> out;
  params.for_each([&](const Param<S>& p) {
    NamedTensor t{p.name, p.shape, {}};
    t.data.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) t.data[i] = static_cast<float>(p.value[static_cast<Eigen::Index>(i)]);
    out.push_back(std::move(t));
  });
  return out;
}

// Every param in `params` must be present with a matching shape; extra
// tensors (metadata, other modules) are ignored.
template <typename S>
void load_into(ParamSet<S>& params, const std::vector<NamedTensor>& tensors) {
  params.for_each([&](Param<S>& p) {
    const NamedTensor* found = nullptr;
    for (const auto& t : tensors)
      if (t.name == p.name) found = &t;
    if (!found) throw FormatError("checkpoint is missing tensor " + p.name);
    if (found->dims != p.shape) throw DimensionError("checkpoint tensor " + p.name + " has a different shape");
    for (std::size_t i = 0; i < p.size(); ++i) p.value[static_cast<Eigen::Index>(i)] = static_cast<S>(found->data[i]);
  });
}

}  // namespace tsr::nn
