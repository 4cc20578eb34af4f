#include "supersub/network.hpp"

#include <cmath>
#include <cstring>

#include "supersub/error.hpp"
#include "supersub/prng.hpp"

namespace supersub {

namespace {

constexpr std::string_view kNetworkMagic = "HSNW";
constexpr std::uint16_t kNetworkVersion = 1;
constexpr std::uint32_t kMaxDims = 64;
constexpr std::uint32_t kMaxWidth = 1u << 20;

}  // namespace

bool is_trainable(TensorRole role) noexcept {
    return role != TensorRole::BnRunningMean && role != TensorRole::BnRunningVar;
}

const char* role_name(TensorRole role) noexcept {
    switch (role) {
        case TensorRole::Weight: return "weight";
        case TensorRole::Bias: return "bias";
        case TensorRole::BnGamma: return "bn.gamma";
        case TensorRole::BnBeta: return "bn.beta";
        case TensorRole::BnRunningMean: return "bn.running_mean";
        case TensorRole::BnRunningVar: return "bn.running_var";
    }
    return "?";
}

void NetworkConfig::validate() const {
    if (layer_dims.size() < 3) throw ParameterError("network needs at least one hidden layer");
    for (auto d : layer_dims) {
        if (d == 0) throw ParameterError("network layer dims must be >= 1");
    }
    if (batchnorm.size() != hidden_layers()) {
        throw ParameterError("network has " + std::to_string(hidden_layers()) + " hidden layers but " +
                             std::to_string(batchnorm.size()) + " batch-norm flags");
    }
}

NetworkConfig NetworkConfig::with_head(std::size_t out) const {
    NetworkConfig c = *this;
    c.layer_dims.back() = out;
    return c;
}

Network::Network(NetworkConfig config) : config_(std::move(config)) {
    config_.validate();
    for (std::size_t l = 0; l + 1 < config_.layer_dims.size(); ++l) {
        const std::size_t in = config_.layer_dims[l], out = config_.layer_dims[l + 1];
        DenseLayer layer{Tensor({out, in}), Tensor({out}), std::nullopt};
        if (l < config_.hidden_layers() && config_.batchnorm[l]) {
            layer.bn = BatchNorm{Tensor({out}, 1.0f), Tensor({out}), Tensor({out}), Tensor({out}, 1.0f)};
        }
        layers_.push_back(std::move(layer));
    }
    build_slots();
}

void Network::build_slots() {
    slots_.clear();
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const bool head = l + 1 == layers_.size();
        const std::string prefix = head ? "head" : "fc" + std::to_string(l);
        auto add = [&](TensorRole role) {
            slots_.push_back({prefix + "." + role_name(role), l, role, head});
        };
        add(TensorRole::Weight);
        add(TensorRole::Bias);
        if (layers_[l].bn) {
            add(TensorRole::BnGamma);
            add(TensorRole::BnBeta);
            add(TensorRole::BnRunningMean);
            add(TensorRole::BnRunningVar);
        }
    }
}

Tensor& Network::tensor(std::size_t slot) {
    return const_cast<Tensor&>(static_cast<const Network&>(*this).tensor(slot));
}

const Tensor& Network::tensor(std::size_t slot) const {
    const TensorSlot& s = slots_.at(slot);
    const DenseLayer& layer = layers_[s.layer];
    switch (s.role) {
        case TensorRole::Weight: return layer.weight;
        case TensorRole::Bias: return layer.bias;
        case TensorRole::BnGamma: return layer.bn->gamma;
        case TensorRole::BnBeta: return layer.bn->beta;
        case TensorRole::BnRunningMean: return layer.bn->running_mean;
        case TensorRole::BnRunningVar: return layer.bn->running_var;
    }
    throw ContractError("unknown tensor role");
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < slots_.size(); ++i) n += tensor(i).size();
    return n;
}

std::size_t Network::body_element_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        if (!slots_[i].head) n += tensor(i).size();
    }
    return n;
}

void Network::replace_head(std::size_t out) {
    if (out == 0) throw ParameterError("head width must be >= 1");
    config_.layer_dims.back() = out;
    const std::size_t in = config_.layer_dims[config_.layer_dims.size() - 2];
    layers_.back() = DenseLayer{Tensor({out, in}), Tensor({out}), std::nullopt};
    build_slots();
}

void Network::validate() const {
    config_.validate();
    if (layers_.size() + 1 != config_.layer_dims.size()) throw ContractError("layer count does not match config");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const std::size_t in = config_.layer_dims[l], out = config_.layer_dims[l + 1];
        const DenseLayer& layer = layers_[l];
        if (layer.weight.shape() != Shape{out, in} || layer.bias.shape() != Shape{out}) {
            throw ContractError("layer " + std::to_string(l) + " shapes do not chain");
        }
        const bool want_bn = l < config_.hidden_layers() && config_.batchnorm[l];
        if (want_bn != layer.bn.has_value()) throw ContractError("layer " + std::to_string(l) + " batch-norm mismatch");
        if (layer.bn) {
            for (const Tensor* t : {&layer.bn->gamma, &layer.bn->beta, &layer.bn->running_mean, &layer.bn->running_var}) {
                if (t->shape() != Shape{out}) throw ContractError("layer " + std::to_string(l) + " batch-norm shape");
            }
            for (float v : layer.bn->running_var.data()) {
                if (!(v > 0.0f)) throw ContractError("layer " + std::to_string(l) + " running_var must be positive");
            }
        }
    }
}

bool Network::bit_equal(const Network& other) const {
    if (config_ != other.config_ || slots_.size() != other.slots_.size()) return false;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        if (!tensor(i).bit_equal(other.tensor(i))) return false;
    }
    return true;
}

void init_dense(DenseLayer& layer, std::uint64_t seed) {
    Prng rng(seed);
    const double sigma = std::sqrt(2.0 / static_cast<double>(layer.weight.shape()[1]));
    for (float& w : layer.weight.data()) w = static_cast<float>(rng.gaussian(0.0, sigma));
    for (float& b : layer.bias.data()) b = 0.0f;
}

Network init_network(const NetworkConfig& config, std::uint64_t seed) {
    Network net(config);
    for (std::size_t l = 0; l < net.layers().size(); ++l) init_dense(net.layers()[l], Prng::derive(seed, 0x1000 + l));
    return net;
}

Bytes encode_network(const Network& net) {
    net.validate();
    const NetworkConfig& c = net.config();
    ByteWriter w;
    w.magic(kNetworkMagic);
    w.u16(kNetworkVersion);
    w.u32(static_cast<std::uint32_t>(c.layer_dims.size()));
    for (auto d : c.layer_dims) w.u32(static_cast<std::uint32_t>(d));
    for (bool bn : c.batchnorm) w.u8(bn ? 1 : 0);
    for (std::size_t i = 0; i < net.slots().size(); ++i) w.f32_array(net.tensor(i).data());
    w.seal_crc();
    return w.take();
}

Network decode_network(std::span<const std::uint8_t> bytes) {
    ByteReader r(verify_trailing_crc(bytes, "network"));
    r.expect_magic(kNetworkMagic);
    const std::uint16_t version = r.u16();
    if (version != kNetworkVersion) r.fail("unsupported network version " + std::to_string(version));
    const std::uint32_t n_dims = r.u32();
    if (n_dims < 3 || n_dims > kMaxDims) r.fail("invalid layer count " + std::to_string(n_dims));
    NetworkConfig config;
    for (std::uint32_t i = 0; i < n_dims; ++i) {
        const std::uint32_t d = r.u32();
        if (d == 0 || d > kMaxWidth) r.fail("invalid layer width " + std::to_string(d));
        config.layer_dims.push_back(d);
    }
    for (std::uint32_t i = 0; i + 2 < n_dims; ++i) {
        const std::uint8_t flag = r.u8();
        if (flag > 1) r.fail("invalid batch-norm flag");
        config.batchnorm.push_back(flag == 1);
    }
    Network net(config);
    for (std::size_t i = 0; i < net.slots().size(); ++i) {
        Tensor& t = net.tensor(i);
        auto values = r.f32_array(t.size());
        std::memcpy(t.data().data(), values.data(), values.size() * sizeof(float));
    }
    r.expect_end();
    try {
        net.validate();
    } catch (const ContractError& e) {
        throw FormatError(std::string("network invalid: ") + e.what(), r.offset());
    }
    return net;
}

void save_network(const Network& net, const std::filesystem::path& path) { write_file(path, encode_network(net)); }

Network load_network(const std::filesystem::path& path) { return decode_network(read_file(path)); }

std::size_t network_file_bytes(const Network& net) {
    const NetworkConfig& c = net.config();
    // magic + version + dim count + dims + bn flags + payload + crc
    return 4 + 2 + 4 + 4 * c.layer_dims.size() + c.hidden_layers() + 4 * net.parameter_count() + 4;
}

}  // namespace supersub
