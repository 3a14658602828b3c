#pragma once

namespace selbench {

inline constexpr const char* kVersion = "0.1.0";

} // namespace selbench
