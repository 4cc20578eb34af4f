#include "supersub/half.hpp"

#include <bit>

namespace supersub::half {

std::uint16_t from_float(float value) noexcept {
    const auto x = std::bit_cast<std::uint32_t>(value);
    const auto sign = static_cast<std::uint16_t>((x >> 16) & 0x8000u);
    const std::uint32_t abs = x & 0x7fffffffu;

    if (abs >= 0x7f800000u) {
        // inf stays inf, NaN stays a quiet NaN
        return static_cast<std::uint16_t>(sign | 0x7c00u | (abs > 0x7f800000u ? 0x0200u : 0u));
    }

    const int exponent = static_cast<int>(abs >> 23) - 127;
    if (exponent < -25) return sign;

    if (exponent < -14) {
        // binary16 subnormal: value = q * 2^-24
        const std::uint32_t mantissa = (abs & 0x007fffffu) | 0x00800000u;
        const int shift = -(exponent + 1);
        std::uint32_t q = mantissa >> shift;
        const std::uint32_t rem = mantissa & ((1u << shift) - 1u);
        const std::uint32_t halfway = 1u << (shift - 1);
        if (rem > halfway || (rem == halfway && (q & 1u))) ++q;
        return static_cast<std::uint16_t>(sign | q);
    }

    std::uint32_t base = (abs >> 13) - (static_cast<std::uint32_t>(127 - 15) << 10);
    const std::uint32_t rem = abs & 0x1fffu;
    if (rem > 0x1000u || (rem == 0x1000u && (base & 1u))) ++base;
    if (base >= 0x7c00u) return static_cast<std::uint16_t>(sign | 0x7c00u);
    return static_cast<std::uint16_t>(sign | base);
}

float to_float(std::uint16_t bits) noexcept {
    const std::uint32_t sign = static_cast<std::uint32_t>(bits & 0x8000u) << 16;
    const std::uint32_t exponent = (bits >> 10) & 0x1fu;
    std::uint32_t mantissa = bits & 0x03ffu;

    std::uint32_t out;
    if (exponent == 0x1fu) {
        out = sign | 0x7f800000u | (mantissa << 13);
    } else if (exponent != 0) {
        out = sign | ((exponent + 127 - 15) << 23) | (mantissa << 13);
    } else if (mantissa == 0) {
        out = sign;
    } else {
        int e = -14;
        while ((mantissa & 0x0400u) == 0) {
            mantissa <<= 1;
            --e;
        }
        mantissa &= 0x03ffu;
        out = sign | (static_cast<std::uint32_t>(e + 127) << 23) | (mantissa << 13);
    }
    return std::bit_cast<float>(out);
}

}  // namespace supersub::half
