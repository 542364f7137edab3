#pragma once

#include <string>

#include "gpr3d/error.hpp"
#include "gpr3d/tensor.hpp"

namespace gpr3d {

enum class IoErrorKind { BadMagic, BadVersion, Truncated, DimOverflow, Corrupt, Io };

struct IoError : Error {
  IoErrorKind kind;
  IoError(IoErrorKind k, const std::string& msg) : Error(msg), kind(k) {}
};

// GPRV volume format: magic "GPRV", version u16 LE, dtype u8 (0 = f32,
// 1 = f64), ndim u8, ndim x u32 LE dims, row-major little-endian payload
// (slowest dimension first). Writes go to a temp file followed by an
// atomic rename so interrupted runs never leave partial volumes.

void write_volume(const std::string& path, const Tensor<float>& t);
void write_volume(const std::string& path, const Tensor<double>& t);

/// Reads a volume, converting the payload to T if necessary.
template <typename T>
Tensor<T> read_volume(const std::string& path);

}  // namespace gpr3d
