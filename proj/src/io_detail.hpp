#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gpr3d/volume_io.hpp"

// Byte-level little-endian encode/decode shared by the GPRV and GPRC
// writers. Internal to the library.
namespace gpr3d::io_detail {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v);
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
void put_f64(std::vector<std::uint8_t>& out, double v);

struct Reader {
  std::vector<std::uint8_t> bytes;
  std::size_t pos = 0;
  std::string path;

  void need(std::size_t n, const char* what) {
    if (pos + n > bytes.size())
      throw IoError(IoErrorKind::Truncated, path + ": truncated file (while reading " + what + ")");
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes[pos++];
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
    pos += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(bytes[pos + static_cast<std::size_t>(i)]) << (8 * i);
    pos += 4;
    return v;
  }
  float f32(const char* what);
  double f64(const char* what);
};

Reader read_file(const std::string& path);
void atomic_write(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace gpr3d::io_detail
