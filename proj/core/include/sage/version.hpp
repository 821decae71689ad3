#pragma once

namespace sage {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sage
