#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "supersub/byte_io.hpp"
#include "supersub/network.hpp"
#include "supersub/quant.hpp"

namespace supersub {

enum class DeltaMode : std::uint8_t { Fp16 = 0, QatInt = 1 };

const char* mode_name(DeltaMode mode) noexcept;
DeltaMode parse_delta_mode(const std::string& text);

enum class PayloadKind : std::uint8_t { Fp16 = 0, Int16 = 1, Float32 = 2 };

struct DeltaEntry {
    std::string name;
    Shape shape;
    PayloadKind kind = PayloadKind::Fp16;
    float range = 0.0f;                   // Int16 only: grid clip range (scale * qmax)
    std::vector<std::uint16_t> half_bits; // Fp16
    std::vector<std::int16_t> ints;       // Int16: q_sub - q_super
    std::vector<float> values;            // Float32: head tensors and qat-int running stats, verbatim

    std::size_t elements() const { return shape_elements(shape); }
    // Delta (or head value) of element k widened to float.
    float value(std::size_t k, int bits) const;

    friend bool operator==(const DeltaEntry&, const DeltaEntry&) = default;
};

struct DeltaPack {
    std::uint32_t superclass_id = 0;
    DeltaMode mode = DeltaMode::Fp16;
    std::uint8_t qat_bits = 8;
    std::uint32_t base_fingerprint = 0;
    std::vector<DeltaEntry> body;  // one per base body tensor, slot order
    std::vector<DeltaEntry> head;  // full-precision head tensors

    std::size_t body_elements() const;
    // Body elements rebuilt by an addition; verbatim entries are copied.
    std::size_t add_elements() const;

    friend bool operator==(const DeltaPack&, const DeltaPack&) = default;
};

// CRC-32C of the network file bytes ahead of its trailing checksum; identifies the base a delta
// was computed against.
std::uint32_t network_fingerprint(const Network& net);

// fp16 mode: body payload = f16(theta_sub - theta_super). Throws ModeError for QatInt.
DeltaPack compute_delta(const Network& super_net, const Network& sub_net, DeltaMode mode,
                        std::uint32_t superclass_id = 0);

// qat-int mode: both networks must sit on `super_grids` for every trainable body tensor; payload =
// q_sub - q_super. Running statistics are stored verbatim. Throws ModeError when a trainable
// body value is off its grid.
DeltaPack compute_delta(const Network& super_net, const Network& sub_net, DeltaMode mode,
                        const NetworkGrids& super_grids, std::uint32_t superclass_id = 0);

// Recreates the specialist: body = base + delta, head from the pack. Throws
// BaseMismatchError when the fingerprint does not match `super_net`.
Network reconstruct(const Network& super_net, const DeltaPack& pack);

struct PackedDelta {
    Bytes bytes;
    std::size_t raw_size = 0;     // container size before DEFLATE
    std::size_t packed_size = 0;  // bytes.size()
};

// Header (16 bytes) + raw DEFLATE (level 9) of the entry table + CRC-32C of header and compressed stream.
PackedDelta pack(const DeltaPack& pack);
DeltaPack unpack(std::span<const std::uint8_t> bytes);

double compression_ratio(const PackedDelta& packed, std::size_t reference_model_bytes);

// Reference size for ratios: full-precision network file for fp16, int8 form for qat-int.
std::size_t reference_model_bytes(const Network& specialist, DeltaMode mode);

struct DeltaHistogram {
    std::string tensor_class;  // role name: weight, bias, bn.gamma, ...
    float min = 0.0f;
    float max = 0.0f;
    std::vector<std::size_t> counts;

    double bin_width() const;
};

// Uniform bins over [min, max] of the body deltas, one histogram per tensor role.
std::vector<DeltaHistogram> delta_histogram(const DeltaPack& pack, std::size_t n_bins);

// Every body delta of the pack, widened to float, in slot order.
std::vector<float> delta_values(const DeltaPack& pack);

}  // namespace supersub
