#pragma once

namespace flowrl {

inline constexpr const char* kVersion = "flowrl 0.1.0";

}  // namespace flowrl
