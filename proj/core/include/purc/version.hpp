#pragma once

namespace purc {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace purc
