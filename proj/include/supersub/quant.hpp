#pragma once

#include <cstdint>
#include <vector>

#include "supersub/network.hpp"
#include "supersub/tensor.hpp"

namespace supersub {

// Symmetric per-tensor integer grid: value(q) = q * range / qmax for q in [-qmax, qmax],
// qmax = 2^(bits-1) - 1. `range` is the clip magnitude (scale * qmax).
struct QuantGrid {
    float range = 1.0f;
    int bits = 8;

    std::int32_t qmax() const noexcept { return (std::int32_t{1} << (bits - 1)) - 1; }
    double scale() const noexcept { return static_cast<double>(range) / qmax(); }

    // Round half away from zero, then clamp to [-qmax, qmax].
    std::int32_t index(float x) const noexcept;
    float value(std::int32_t q) const noexcept;
    bool on_grid(float x) const noexcept;

    // Grid spanning max|t|; an all-zero tensor gets scale 1.
    static QuantGrid fit(const Tensor& t, int bits);

    friend bool operator==(const QuantGrid&, const QuantGrid&) = default;
};

void check_qat_bits(int bits);

Tensor fake_quantize(const Tensor& t, int bits);
Tensor fake_quantize(const Tensor& t, const QuantGrid& grid);

// One grid per tensor slot of a network, in slot order.
struct NetworkGrids {
    int bits = 8;
    std::vector<QuantGrid> grids;

    friend bool operator==(const NetworkGrids&, const NetworkGrids&) = default;
};

// Grids fitted to every tensor of `net`.
NetworkGrids fit_grids(const Network& net, int bits);

// Trainable body tensors take their grid from `base`; head tensors and batch-norm running
// statistics get grids fitted to `net` itself.
NetworkGrids shared_body_grids(const NetworkGrids& base, const Network& net);

// Snaps every tensor to its grid. Running variances are kept at >= one grid step so they
// stay positive.
Network quantize_network(const Network& net, const NetworkGrids& grids);

}  // namespace supersub

namespace supersub {

// Size of the int8 form of a network: the network-file header, one byte per element and
// an f32 range per tensor, plus the trailing checksum. Reference size for qat-int ratios.
std::size_t quantized_network_bytes(const Network& net);

}  // namespace supersub
