#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace dnnate {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Shortest decimal that reads back to the same double.
std::string format_double(double v);

// 17-significant-digit decimal, used by the CSV exporters.
std::string format_double17(double v);

// FNV-1a 64-bit hash as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

}  // namespace dnnate
