#pragma once

#include <cstdint>

namespace supersub {

// splitmix64 generator. Single owner; derive child streams with derive() before handing
// a generator to another thread.
class Prng {
public:
    explicit Prng(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next_u64() noexcept;

    // Uniform in (0, 1]; 53 bits of resolution.
    double uniform_open_low() noexcept;
    // Uniform in [0, 1).
    double uniform() noexcept;
    // Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound) noexcept;

    // One Box-Muller draw from N(mean, sigma^2). Throws ParameterError for sigma < 0.
    double gaussian(double mean, double sigma);

    std::uint64_t state() const noexcept { return state_; }

    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) noexcept { return seed ^ stream; }

private:
    std::uint64_t state_;
};

}  // namespace supersub
