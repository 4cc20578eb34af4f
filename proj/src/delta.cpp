#include "supersub/delta.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "supersub/deflate.hpp"
#include "supersub/error.hpp"
#include "supersub/half.hpp"

namespace supersub {

namespace {

constexpr std::string_view kDeltaMagic = "HSDL";
constexpr std::uint16_t kDeltaVersion = 1;
constexpr std::size_t kHeaderBytes = 16;
constexpr std::uint32_t kMaxEntries = 1u << 16;
constexpr std::uint32_t kMaxRank = 8;

void check_body_shapes(const Network& super_net, const Network& sub_net) {
    const auto& a = super_net.slots();
    const auto& b = sub_net.slots();
    std::size_t body_a = 0, body_b = 0;
    for (const auto& s : a) body_a += !s.head;
    for (const auto& s : b) body_b += !s.head;
    if (body_a != body_b) throw ContractError("compute_delta: body tensor counts differ");
    for (std::size_t i = 0; i < body_a; ++i) {
        if (a[i].name != b[i].name || super_net.tensor(i).shape() != sub_net.tensor(i).shape()) {
            throw ContractError("compute_delta: body tensor " + a[i].name + " shape " +
                                shape_string(super_net.tensor(i).shape()) + " vs " +
                                shape_string(sub_net.tensor(i).shape()));
        }
    }
}

std::vector<DeltaEntry> head_entries(const Network& sub_net) {
    std::vector<DeltaEntry> out;
    for (std::size_t i = 0; i < sub_net.slots().size(); ++i) {
        if (!sub_net.slots()[i].head) continue;
        const Tensor& t = sub_net.tensor(i);
        DeltaEntry e{sub_net.slots()[i].name, t.shape(), PayloadKind::Float32, 0.0f, {}, {}, t.values()};
        out.push_back(std::move(e));
    }
    return out;
}

void write_entry(ByteWriter& w, const DeltaEntry& e) {
    w.string(e.name);
    w.u32(static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) w.u32(static_cast<std::uint32_t>(d));
    w.u8(static_cast<std::uint8_t>(e.kind));
    switch (e.kind) {
        case PayloadKind::Fp16:
            for (auto h : e.half_bits) w.u16(h);
            break;
        case PayloadKind::Int16:
            w.f32(e.range);
            for (auto q : e.ints) w.i16(q);
            break;
        case PayloadKind::Float32:
            w.f32_array(e.values);
            break;
    }
}

DeltaEntry read_entry(ByteReader& r) {
    DeltaEntry e;
    e.name = r.string(4096);
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > kMaxRank) r.fail("invalid tensor rank " + std::to_string(rank));
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        const std::uint32_t d = r.u32();
        if (d == 0) r.fail("zero tensor dimension");
        e.shape.push_back(d);
        count *= d;
        if (count > r.remaining()) r.fail("tensor larger than payload");
    }
    const std::uint8_t kind = r.u8();
    switch (kind) {
        case 0:
            e.kind = PayloadKind::Fp16;
            if (count > r.remaining() / 2) r.fail("truncated fp16 payload");
            e.half_bits.resize(count);
            for (auto& h : e.half_bits) h = r.u16();
            break;
        case 1:
            e.kind = PayloadKind::Int16;
            e.range = r.f32();
            if (!(e.range > 0.0f) || !std::isfinite(e.range)) r.fail("invalid grid range");
            if (count > r.remaining() / 2) r.fail("truncated int16 payload");
            e.ints.resize(count);
            for (auto& q : e.ints) q = r.i16();
            break;
        case 2:
            e.kind = PayloadKind::Float32;
            e.values = r.f32_array(count);
            break;
        default:
            r.fail("unknown payload kind " + std::to_string(kind));
    }
    return e;
}

}  // namespace

const char* mode_name(DeltaMode mode) noexcept { return mode == DeltaMode::Fp16 ? "fp16" : "qat-int"; }

DeltaMode parse_delta_mode(const std::string& text) {
    if (text == "fp16") return DeltaMode::Fp16;
    if (text == "qat-int") return DeltaMode::QatInt;
    throw ParameterError("unknown delta mode \"" + text + "\" (expected fp16 or qat-int)");
}

float DeltaEntry::value(std::size_t k, int bits) const {
    switch (kind) {
        case PayloadKind::Fp16: return half::to_float(half_bits[k]);
        case PayloadKind::Int16: return QuantGrid{range, bits}.value(ints[k]);
        case PayloadKind::Float32: return values[k];
    }
    return 0.0f;
}

std::size_t DeltaPack::body_elements() const {
    std::size_t n = 0;
    for (const auto& e : body) n += e.elements();
    return n;
}

std::size_t DeltaPack::add_elements() const {
    std::size_t n = 0;
    for (const auto& e : body) n += e.kind == PayloadKind::Float32 ? 0 : e.elements();
    return n;
}

std::uint32_t network_fingerprint(const Network& net) {
    // The file ends in its own CRC; hashing that too would give the same residue for every file.
    const Bytes file = encode_network(net);
    return crc32c(std::span(file).first(file.size() - 4));
}

DeltaPack compute_delta(const Network& super_net, const Network& sub_net, DeltaMode mode,
                        std::uint32_t superclass_id) {
    if (mode != DeltaMode::Fp16) throw ModeError("qat-int deltas need the quantization grids of a QAT base network");
    check_body_shapes(super_net, sub_net);
    DeltaPack pack{superclass_id, mode, 8, network_fingerprint(super_net), {}, head_entries(sub_net)};
    for (std::size_t i = 0; i < super_net.slots().size(); ++i) {
        if (super_net.slots()[i].head) continue;
        const auto base = super_net.tensor(i).data();
        const auto tuned = sub_net.tensor(i).data();
        DeltaEntry e{super_net.slots()[i].name, super_net.tensor(i).shape(), PayloadKind::Fp16, 0.0f, {}, {}, {}};
        e.half_bits.reserve(base.size());
        for (std::size_t k = 0; k < base.size(); ++k) {
            const float d = tuned[k] - base[k];
            const std::uint16_t h = half::from_float(d);
            if ((h & 0x7c00u) == 0x7c00u) {
                throw OverflowError("delta " + std::to_string(d) + " in " + e.name + " exceeds the binary16 range");
            }
            e.half_bits.push_back(h);
        }
        pack.body.push_back(std::move(e));
    }
    return pack;
}

DeltaPack compute_delta(const Network& super_net, const Network& sub_net, DeltaMode mode,
                        const NetworkGrids& super_grids, std::uint32_t superclass_id) {
    if (mode == DeltaMode::Fp16) return compute_delta(super_net, sub_net, mode, superclass_id);
    check_body_shapes(super_net, sub_net);
    if (super_grids.grids.size() != super_net.slots().size()) throw ContractError("compute_delta: grid count mismatch");
    DeltaPack pack{superclass_id, mode, static_cast<std::uint8_t>(super_grids.bits), network_fingerprint(super_net),
                   {}, head_entries(sub_net)};
    for (std::size_t i = 0; i < super_net.slots().size(); ++i) {
        if (super_net.slots()[i].head) continue;
        const auto base = super_net.tensor(i).data();
        const auto tuned = sub_net.tensor(i).data();
        if (!is_trainable(super_net.slots()[i].role)) {
            // Running statistics follow the specialist's data, not the base grid; kept verbatim.
            pack.body.push_back({super_net.slots()[i].name, super_net.tensor(i).shape(), PayloadKind::Float32, 0.0f,
                                 {}, {}, std::vector<float>(tuned.begin(), tuned.end())});
            continue;
        }
        const QuantGrid& grid = super_grids.grids[i];
        DeltaEntry e{super_net.slots()[i].name, super_net.tensor(i).shape(), PayloadKind::Int16, grid.range, {}, {}, {}};
        e.ints.reserve(base.size());
        for (std::size_t k = 0; k < base.size(); ++k) {
            if (!grid.on_grid(base[k]) || !grid.on_grid(tuned[k])) {
                throw ModeError("compute_delta: " + e.name + " is not on its quantization grid; qat-int needs "
                                "quantized networks");
            }
            e.ints.push_back(static_cast<std::int16_t>(grid.index(tuned[k]) - grid.index(base[k])));
        }
        pack.body.push_back(std::move(e));
    }
    return pack;
}

Network reconstruct(const Network& super_net, const DeltaPack& pack) {
    if (network_fingerprint(super_net) != pack.base_fingerprint) {
        throw BaseMismatchError("delta for superclass " + std::to_string(pack.superclass_id) +
                                " was computed against a different base network");
    }
    if (pack.head.size() != 2 || pack.head[0].shape.size() != 2) throw ContractError("reconstruct: malformed head entries");

    Network out = super_net;
    out.replace_head(pack.head[0].shape[0]);
    std::size_t body = 0;
    for (std::size_t i = 0; i < out.slots().size(); ++i) {
        const TensorSlot& slot = out.slots()[i];
        auto dst = out.tensor(i).data();
        if (slot.head) {
            const DeltaEntry& e = pack.head[slot.role == TensorRole::Weight ? 0 : 1];
            if (e.name != slot.name || e.shape != out.tensor(i).shape() || e.kind != PayloadKind::Float32) {
                throw ContractError("reconstruct: head entry " + e.name + " does not fit " + slot.name);
            }
            std::copy(e.values.begin(), e.values.end(), dst.begin());
            continue;
        }
        if (body >= pack.body.size()) throw ContractError("reconstruct: pack has too few body entries");
        const DeltaEntry& e = pack.body[body++];
        if (e.name != slot.name || e.shape != out.tensor(i).shape()) {
            throw ContractError("reconstruct: body entry " + e.name + " does not fit " + slot.name);
        }
        if (e.kind == PayloadKind::Fp16) {
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += half::to_float(e.half_bits[k]);
        } else if (e.kind == PayloadKind::Int16) {
            const QuantGrid grid{e.range, pack.qat_bits};
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = grid.value(grid.index(dst[k]) + e.ints[k]);
        } else {
            std::copy(e.values.begin(), e.values.end(), dst.begin());
        }
    }
    if (body != pack.body.size()) throw ContractError("reconstruct: pack has extra body entries");
    out.validate();
    return out;
}

PackedDelta pack(const DeltaPack& d) {
    ByteWriter header;
    header.magic(kDeltaMagic);
    header.u16(kDeltaVersion);
    header.u32(d.superclass_id);
    header.u8(static_cast<std::uint8_t>(d.mode));
    header.u8(d.qat_bits);
    header.u32(d.base_fingerprint);

    ByteWriter table;
    table.u32(static_cast<std::uint32_t>(d.body.size() + d.head.size()));
    for (const auto& e : d.body) write_entry(table, e);
    for (const auto& e : d.head) write_entry(table, e);

    const Bytes compressed = deflate_raw(table.bytes(), 9);
    ByteWriter out;
    out.raw(header.bytes());
    out.raw(compressed);
    out.seal_crc();

    PackedDelta p;
    p.raw_size = kHeaderBytes + table.size() + 4;
    p.bytes = out.take();
    p.packed_size = p.bytes.size();
    return p;
}

DeltaPack unpack(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    r.expect_magic(kDeltaMagic);
    const auto sealed = verify_trailing_crc(bytes, "delta");
    if (sealed.size() < kHeaderBytes) throw FormatError("delta: truncated header", sealed.size());
    const std::uint16_t version = r.u16();
    if (version != kDeltaVersion) r.fail("unsupported delta version " + std::to_string(version));
    DeltaPack d;
    d.superclass_id = r.u32();
    const std::uint8_t mode = r.u8();
    if (mode > 1) r.fail("unknown delta mode " + std::to_string(mode));
    d.mode = static_cast<DeltaMode>(mode);
    d.qat_bits = r.u8();
    if (d.mode == DeltaMode::QatInt && (d.qat_bits < 2 || d.qat_bits > 8)) r.fail("invalid qat bits");
    d.base_fingerprint = r.u32();

    Bytes table;
    try {
        table = inflate_raw(sealed.subspan(kHeaderBytes));
    } catch (const FormatError& e) {
        throw e.shifted(kHeaderBytes, "");
    }

    ByteReader t(table);
    const std::uint32_t count = t.u32();
    if (count > kMaxEntries) t.fail("entry count " + std::to_string(count) + " too large");
    for (std::uint32_t i = 0; i < count; ++i) {
        DeltaEntry e = read_entry(t);
        if (e.name.rfind("head.", 0) == 0) {
            if (e.kind != PayloadKind::Float32) t.fail("head entry " + e.name + " is not full precision");
            d.head.push_back(std::move(e));
        } else {
            if (!d.head.empty()) t.fail("body entry after head entries");
            const PayloadKind expected = d.mode == DeltaMode::Fp16 ? PayloadKind::Fp16 : PayloadKind::Int16;
            const bool verbatim = d.mode == DeltaMode::QatInt && e.kind == PayloadKind::Float32;
            if (e.kind != expected && !verbatim) t.fail("payload kind does not match delta mode");
            d.body.push_back(std::move(e));
        }
    }
    t.expect_end();
    return d;
}

double compression_ratio(const PackedDelta& packed, std::size_t reference_model_bytes) {
    if (reference_model_bytes == 0) throw ParameterError("compression_ratio: reference size must be > 0");
    return static_cast<double>(packed.packed_size) / static_cast<double>(reference_model_bytes);
}

std::size_t reference_model_bytes(const Network& specialist, DeltaMode mode) {
    return mode == DeltaMode::Fp16 ? network_file_bytes(specialist) : quantized_network_bytes(specialist);
}

double DeltaHistogram::bin_width() const {
    return counts.empty() ? 0.0 : (static_cast<double>(max) - static_cast<double>(min)) / counts.size();
}

std::vector<float> delta_values(const DeltaPack& pack) {
    std::vector<float> out;
    out.reserve(pack.body_elements());
    for (const auto& e : pack.body) {
        for (std::size_t k = 0; k < e.elements(); ++k) out.push_back(e.value(k, pack.qat_bits));
    }
    return out;
}

std::vector<DeltaHistogram> delta_histogram(const DeltaPack& pack, std::size_t n_bins) {
    if (n_bins == 0) throw ParameterError("delta_histogram: need at least one bin");
    // Role is the suffix after the layer prefix ("fc0.bn.gamma" -> "bn.gamma").
    std::map<std::string, std::vector<float>> by_class;
    std::vector<std::string> order;
    for (const auto& e : pack.body) {
        const std::string cls = e.name.substr(e.name.find('.') + 1);
        if (!by_class.count(cls)) order.push_back(cls);
        auto& dst = by_class[cls];
        for (std::size_t k = 0; k < e.elements(); ++k) dst.push_back(e.value(k, pack.qat_bits));
    }
    std::vector<DeltaHistogram> out;
    for (const auto& cls : order) {
        const auto& values = by_class[cls];
        DeltaHistogram h{cls, 0.0f, 0.0f, std::vector<std::size_t>(n_bins, 0)};
        const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
        h.min = *lo;
        h.max = *hi;
        const double width = h.bin_width();
        for (float v : values) {
            std::size_t bin = 0;
            if (width > 0.0) {
                bin = static_cast<std::size_t>((static_cast<double>(v) - h.min) / width);
                bin = std::min(bin, n_bins - 1);
            }
            ++h.counts[bin];
        }
        out.push_back(std::move(h));
    }
    return out;
}

}  // namespace supersub
