#include "supersub/prng.hpp"

#include <cmath>
#include <numbers>

#include "supersub/error.hpp"

namespace supersub {

std::uint64_t Prng::next_u64() noexcept {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double Prng::uniform_open_low() noexcept {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double Prng::uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Prng::below(std::uint64_t bound) noexcept {
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % bound;
}

double Prng::gaussian(double mean, double sigma) {
    if (!(sigma >= 0.0)) throw ParameterError("gaussian: sigma must be >= 0, got " + std::to_string(sigma));
    const double u1 = uniform_open_low();
    const double u2 = uniform();
    if (sigma == 0.0) return mean;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * radius * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace supersub
