#pragma once

namespace oxy {
inline constexpr const char* kVersion = "0.1.0";
}
