#pragma once

#include <cstdint>

namespace supersub::half {

inline constexpr float kMax = 65504.0f;

// IEEE-754 binary32 -> binary16 bits, round to nearest, ties to even.
// Values beyond kMax after rounding become infinity; callers check.
std::uint16_t from_float(float value) noexcept;

float to_float(std::uint16_t bits) noexcept;

inline float round_trip(float value) noexcept { return to_float(from_float(value)); }

}  // namespace supersub::half
