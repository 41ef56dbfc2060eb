#pragma once

#include <charconv>
#include <string>

namespace haldane {

/// Shortest decimal text that parses back to the same double.
inline std::string shortest(double value) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  (void)ec;
  return std::string(buf, end);
}

}  // namespace haldane
