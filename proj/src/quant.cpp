#include "supersub/quant.hpp"

#include <algorithm>
#include <cmath>

#include "supersub/error.hpp"

namespace supersub {

std::int32_t QuantGrid::index(float x) const noexcept {
    const double q = std::round(static_cast<double>(x) * qmax() / static_cast<double>(range));
    return static_cast<std::int32_t>(std::clamp(q, -static_cast<double>(qmax()), static_cast<double>(qmax())));
}

float QuantGrid::value(std::int32_t q) const noexcept {
    return static_cast<float>(static_cast<double>(q) * static_cast<double>(range) / qmax());
}

bool QuantGrid::on_grid(float x) const noexcept { return value(index(x)) == x; }

QuantGrid QuantGrid::fit(const Tensor& t, int bits) {
    check_qat_bits(bits);
    float peak = 0.0f;
    for (float v : t.data()) peak = std::max(peak, std::fabs(v));
    QuantGrid g{peak, bits};
    if (peak == 0.0f) g.range = static_cast<float>(g.qmax());
    return g;
}

void check_qat_bits(int bits) {
    if (bits < 2 || bits > 8) throw ParameterError("qat bits must be in [2, 8], got " + std::to_string(bits));
}

Tensor fake_quantize(const Tensor& t, const QuantGrid& grid) {
    Tensor out = t;
    for (float& v : out.data()) v = grid.value(grid.index(v));
    return out;
}

Tensor fake_quantize(const Tensor& t, int bits) { return fake_quantize(t, QuantGrid::fit(t, bits)); }

NetworkGrids fit_grids(const Network& net, int bits) {
    NetworkGrids g{bits, {}};
    for (std::size_t i = 0; i < net.slots().size(); ++i) g.grids.push_back(QuantGrid::fit(net.tensor(i), bits));
    return g;
}

NetworkGrids shared_body_grids(const NetworkGrids& base, const Network& net) {
    NetworkGrids g{base.bits, {}};
    std::size_t body = 0;
    for (std::size_t i = 0; i < net.slots().size(); ++i) {
        const TensorSlot& s = net.slots()[i];
        if (!s.head && body++ >= base.grids.size()) throw ContractError("base grids do not cover the network body");
        g.grids.push_back(s.head || !is_trainable(s.role) ? QuantGrid::fit(net.tensor(i), base.bits)
                                                          : base.grids[body - 1]);
    }
    return g;
}

Network quantize_network(const Network& net, const NetworkGrids& grids) {
    if (grids.grids.size() != net.slots().size()) {
        throw ContractError("quantize_network: " + std::to_string(grids.grids.size()) + " grids for " +
                            std::to_string(net.slots().size()) + " tensors");
    }
    Network out = net;
    for (std::size_t i = 0; i < net.slots().size(); ++i) {
        const QuantGrid& g = grids.grids[i];
        const bool variance = net.slots()[i].role == TensorRole::BnRunningVar;
        for (float& v : out.tensor(i).data()) {
            std::int32_t q = g.index(v);
            if (variance) q = std::max(q, std::int32_t{1});
            v = g.value(q);
        }
    }
    return out;
}

}  // namespace supersub

namespace supersub {

std::size_t quantized_network_bytes(const Network& net) {
    const NetworkConfig& c = net.config();
    return 4 + 2 + 4 + 4 * c.layer_dims.size() + c.hidden_layers() + 4 * net.slots().size() +
           net.parameter_count() + 4;
}

}  // namespace supersub
