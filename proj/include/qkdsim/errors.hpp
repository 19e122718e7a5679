#pragma once

#include <stdexcept>
#include <string>

namespace qkd {

// Invalid or inconsistent configuration (bad scenario field, unknown
// intensity class, protocol/model mismatch).  CLI maps this to exit 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A session-level abort signalled at run time (QBER above threshold,
// fatal synchronization loss, exhausted authentication pool).  CLI maps
// this to exit 3.
struct AbortError : std::runtime_error {
  explicit AbortError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qkd
