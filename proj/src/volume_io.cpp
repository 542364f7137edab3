#include "gpr3d/volume_io.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "io_detail.hpp"

namespace gpr3d {

namespace io_detail {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xFF));
}

float Reader::f32(const char* what) {
  std::uint32_t bits = u32(what);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

double Reader::f64(const char* what) {
  need(8, what);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(bytes[pos + static_cast<std::size_t>(i)]) << (8 * i);
  pos += 8;
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

Reader read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrorKind::Io, path + ": cannot open for reading");
  Reader r;
  r.path = path;
  in.seekg(0, std::ios::end);
  r.bytes.resize(static_cast<std::size_t>(in.tellg()));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(r.bytes.data()), static_cast<std::streamsize>(r.bytes.size()));
  if (!in) throw IoError(IoErrorKind::Io, path + ": read failed");
  return r;
}

void atomic_write(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoErrorKind::Io, tmp.string() + ": cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(IoErrorKind::Io, tmp.string() + ": write failed");
  }
  fs::rename(tmp, target);
}

}  // namespace io_detail

namespace {

using namespace io_detail;

constexpr std::uint8_t kMagic[4] = {0x47, 0x50, 0x52, 0x56};  // "GPRV"
constexpr std::uint16_t kVersion = 1;
constexpr std::uint64_t kMaxElements = std::uint64_t(1) << 40;

template <typename T>
void write_volume_impl(const std::string& path, const Tensor<T>& t, std::uint8_t dtype) {
  require(!t.shape.empty(), "write_volume: scalar tensors are not supported");
  std::vector<std::uint8_t> out;
  out.reserve(16 + t.numel() * sizeof(T));
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u16(out, kVersion);
  out.push_back(dtype);
  out.push_back(static_cast<std::uint8_t>(t.shape.size()));
  for (std::size_t d : t.shape) {
    require(d <= 0xFFFFFFFFull, "write_volume: dimension too large for u32");
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (const T v : t.data) {
    if constexpr (sizeof(T) == 4)
      put_f32(out, static_cast<float>(v));
    else
      put_f64(out, static_cast<double>(v));
  }
  atomic_write(path, out);
}

}  // namespace

void write_volume(const std::string& path, const Tensor<float>& t) {
  write_volume_impl(path, t, 0);
}

void write_volume(const std::string& path, const Tensor<double>& t) {
  write_volume_impl(path, t, 1);
}

template <typename T>
Tensor<T> read_volume(const std::string& path) {
  Reader r = read_file(path);
  r.need(4, "magic");
  if (std::memcmp(r.bytes.data(), kMagic, 4) != 0)
    throw IoError(IoErrorKind::BadMagic, path + ": bad magic (not a GPRV volume)");
  r.pos = 4;
  const std::uint16_t version = r.u16("version");
  if (version != kVersion)
    throw IoError(IoErrorKind::BadVersion,
                  path + ": unsupported version " + std::to_string(version));
  const std::uint8_t dtype = r.u8("dtype");
  if (dtype > 1) throw IoError(IoErrorKind::Corrupt, path + ": unknown dtype " + std::to_string(dtype));
  const std::uint8_t ndim = r.u8("ndim");
  if (ndim == 0) throw IoError(IoErrorKind::Corrupt, path + ": zero-dimensional volume");
  Shape shape(ndim);
  std::uint64_t total = 1;
  for (std::uint8_t i = 0; i < ndim; ++i) {
    const std::uint32_t d = r.u32("dims");
    shape[i] = d;
    total *= d;
    if (total > kMaxElements)
      throw IoError(IoErrorKind::DimOverflow, path + ": dimension product overflows sane limits");
  }
  const std::size_t width = dtype == 0 ? 4 : 8;
  if (r.bytes.size() - r.pos != total * width)
    throw IoError(IoErrorKind::Truncated,
                  path + ": payload holds " + std::to_string((r.bytes.size() - r.pos) / width) +
                      " values but dims declare " + std::to_string(total));
  Tensor<T> t(shape);
  for (std::uint64_t i = 0; i < total; ++i)
    t.data[i] = dtype == 0 ? static_cast<T>(r.f32("payload")) : static_cast<T>(r.f64("payload"));
  return t;
}

template Tensor<float> read_volume<float>(const std::string&);
template Tensor<double> read_volume<double>(const std::string&);

}  // namespace gpr3d
