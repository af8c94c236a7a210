#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace diagest::detail {

/// Shortest decimal form that parses back to exactly the same double.
/// Keeps emitted files byte-stable across runs.
inline std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace diagest::detail
