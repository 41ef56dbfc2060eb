#pragma once

#include <string_view>

namespace haldane {

inline constexpr std::string_view version = "0.1.0";

}  // namespace haldane
