#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "supersub/byte_io.hpp"
#include "supersub/tensor.hpp"

namespace supersub {

inline constexpr float kBatchNormEpsilon = 1e-5f;
inline constexpr float kBatchNormMomentum = 0.9f;

struct NetworkConfig {
    // [input, hidden_1, ..., hidden_L, output]
    std::vector<std::size_t> layer_dims;
    // One flag per hidden layer.
    std::vector<bool> batchnorm;

    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t output_dim() const { return layer_dims.back(); }
    std::size_t hidden_layers() const { return layer_dims.size() - 2; }

    // Throws ParameterError.
    void validate() const;
    NetworkConfig with_head(std::size_t out) const;

    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

struct BatchNorm {
    Tensor gamma;
    Tensor beta;
    Tensor running_mean;
    Tensor running_var;

    friend bool operator==(const BatchNorm&, const BatchNorm&) = default;
};

// Dense -> [BatchNorm] -> ReLU for hidden layers; the last layer is the linear head.
struct DenseLayer {
    Tensor weight; // [out x in]
    Tensor bias;   // [out]
    std::optional<BatchNorm> bn;

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

enum class TensorRole : std::uint8_t { Weight, Bias, BnGamma, BnBeta, BnRunningMean, BnRunningVar };

bool is_trainable(TensorRole role) noexcept;
const char* role_name(TensorRole role) noexcept;

struct TensorSlot {
    std::string name;
    std::size_t layer;
    TensorRole role;
    bool head;
};

class Network {
public:
    Network() = default;
    // Zero-filled network with unit running variance; see init_network for random weights.
    explicit Network(NetworkConfig config);

    const NetworkConfig& config() const noexcept { return config_; }
    std::size_t head_dim() const { return config_.output_dim(); }
    std::size_t input_dim() const { return config_.input_dim(); }

    std::vector<DenseLayer>& layers() noexcept { return layers_; }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    DenseLayer& head() { return layers_.back(); }
    const DenseLayer& head() const { return layers_.back(); }

    // Every tensor in declaration order: per layer weight, bias, then gamma, beta,
    // running_mean, running_var when the layer has batch norm.
    const std::vector<TensorSlot>& slots() const noexcept { return slots_; }
    Tensor& tensor(std::size_t slot);
    const Tensor& tensor(std::size_t slot) const;

    std::size_t parameter_count() const;
    std::size_t body_element_count() const;

    // Replaces the head with a zeroed layer of width `out`.
    void replace_head(std::size_t out);

    // Throws ContractError when shapes no longer chain or running_var is not positive.
    void validate() const;

    bool bit_equal(const Network& other) const;

    friend bool operator==(const Network& a, const Network& b) {
        return a.config_ == b.config_ && a.layers_ == b.layers_;
    }

private:
    void build_slots();

    NetworkConfig config_;
    std::vector<DenseLayer> layers_;
    std::vector<TensorSlot> slots_;
};

// He-normal weights N(0, 2/fan_in), zero biases, gamma 1, beta 0, running stats (0, 1).
Network init_network(const NetworkConfig& config, std::uint64_t seed);

// Fills a layer's weight with He-normal draws and zeroes its bias.
void init_dense(DenseLayer& layer, std::uint64_t seed);

Bytes encode_network(const Network& net);
Network decode_network(std::span<const std::uint8_t> bytes);
void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

// Size of the network file in bytes; the unit of "model bytes" in memory accounting.
std::size_t network_file_bytes(const Network& net);

}  // namespace supersub
