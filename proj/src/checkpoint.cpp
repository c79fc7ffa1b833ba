// Checkpoint serialization. Byte-level little-endian writes so files are
// identical across platforms.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "fms/param_store.hpp"

namespace fms {

namespace {

void put_u16(std::ostream& os, uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

void put_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

void put_f32(std::ostream& os, float f) {
  uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(os, v);
}

uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

float get_f32(std::istream& is) {
  const uint32_t v = get_u32(is);
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

constexpr char kMagic[4] = {'F', 'M', 'S', '1'};

}  // namespace

void save_checkpoint(const ParamStoref& store, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 4);
  put_u32(os, static_cast<uint32_t>(store.count()));
  for (const auto& name : store.names()) {
    const Tensorf& t = store.get(name);
    if (name.size() > 0xffff) throw std::runtime_error("parameter name too long: " + name);
    put_u16(os, static_cast<uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    const auto& shape = t.shape();
    if (shape.size() > 0xff) throw std::runtime_error("parameter rank too large: " + name);
    os.put(static_cast<char>(shape.size()));
    for (int64_t d : shape) put_u32(os, static_cast<uint32_t>(d));
    for (int64_t i = 0; i < t.numel(); ++i) put_f32(os, t[i]);
  }
  if (!os) throw std::runtime_error("write failure on checkpoint: " + path);
}

ParamStoref load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("bad checkpoint magic in " + path);
  const uint32_t n = get_u32(is);
  ParamStoref store;
  for (uint32_t e = 0; e < n; ++e) {
    const uint16_t name_len = get_u16(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const int rank = is.get();
    if (rank < 0) throw std::runtime_error("truncated checkpoint: " + path);
    Shape shape(static_cast<size_t>(rank));
    for (int i = 0; i < rank; ++i) shape[static_cast<size_t>(i)] = get_u32(is);
    Tensorf& t = store.create(name, shape);
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = get_f32(is);
    if (!is) throw std::runtime_error("truncated checkpoint entry '" + name + "' in " + path);
  }
  return store;
}

}  // namespace fms
