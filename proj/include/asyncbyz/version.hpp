#pragma once

namespace asyncbyz {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace asyncbyz
