#pragma once

namespace so3ae {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace so3ae
