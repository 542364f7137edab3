#pragma once

#include <stdexcept>
#include <string>

namespace gpr3d {

/// Error type thrown for every contract violation (shape mismatches,
/// malformed files, invalid configuration). The message is expected to
/// name the offending axis, key, or file.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

}  // namespace gpr3d
