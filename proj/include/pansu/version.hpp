#pragma once

namespace pansu {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace pansu
