#pragma once

#include <string>

namespace fluidmc {

/// Shortest decimal representation that round-trips the 64-bit float.
std::string format_double(double value);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fluidmc
