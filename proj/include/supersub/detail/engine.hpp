#pragma once

// Forward and backward passes of the dense/batch-norm/ReLU stack, generic over the scalar
// type. float drives training and inference; double drives the finite-difference check.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "supersub/network.hpp"
#include "supersub/tensor.hpp"

namespace supersub::detail {

inline constexpr std::size_t kNoSlot = static_cast<std::size_t>(-1);

struct LayerSlots {
    std::size_t weight = kNoSlot, bias = kNoSlot;
    std::size_t gamma = kNoSlot, beta = kNoSlot, mean = kNoSlot, var = kNoSlot;
    std::size_t in = 0, out = 0;
    bool bn() const noexcept { return gamma != kNoSlot; }
};

std::vector<LayerSlots> layer_slots(const Network& net);

template <typename T>
struct Params {
    std::vector<LayerSlots> layout;
    std::vector<std::vector<T>> tensors;  // slot order
};

template <typename T>
Params<T> params_from(const Network& net) {
    Params<T> p{layer_slots(net), {}};
    for (std::size_t i = 0; i < net.slots().size(); ++i) {
        const auto src = net.tensor(i).data();
        p.tensors.emplace_back(src.begin(), src.end());
    }
    return p;
}

template <typename T>
struct LayerCache {
    std::vector<T> input;       // m x in
    std::vector<T> pre;         // m x out, before batch norm
    std::vector<T> xhat;        // m x out, batch norm only
    std::vector<T> inv_std;     // out, batch norm only
    std::vector<T> batch_mean;  // out, batch norm training only
    std::vector<T> batch_var;   // out, biased, batch norm training only
    std::vector<T> output;      // m x out: ReLU output, or logits for the head
};

template <typename T>
struct Cache {
    std::size_t rows = 0;
    bool training = false;
    std::vector<LayerCache<T>> layers;
    std::vector<T> probs;  // m x classes
};

template <typename T>
Cache<T> forward(const Params<T>& p, std::span<const T> batch, std::size_t m, bool training) {
    Cache<T> cache;
    cache.rows = m;
    cache.training = training;
    std::vector<T> x(batch.begin(), batch.end());
    const T eps = static_cast<T>(kBatchNormEpsilon);

    for (std::size_t l = 0; l < p.layout.size(); ++l) {
        const LayerSlots& s = p.layout[l];
        const bool head = l + 1 == p.layout.size();
        LayerCache<T> lc;
        lc.input = std::move(x);
        lc.pre.assign(m * s.out, T(0));
        kernels::matmul_bt<T>(lc.input, p.tensors[s.weight], lc.pre, m, s.in, s.out);
        const auto& bias = p.tensors[s.bias];
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < s.out; ++j) lc.pre[i * s.out + j] += bias[j];
        }

        if (head) {
            lc.output = lc.pre;
        } else {
            std::vector<T> y = lc.pre;
            if (s.bn()) {
                const auto& gamma = p.tensors[s.gamma];
                const auto& beta = p.tensors[s.beta];
                lc.xhat.assign(m * s.out, T(0));
                lc.inv_std.assign(s.out, T(0));
                if (training) {
                    lc.batch_mean.assign(s.out, T(0));
                    lc.batch_var.assign(s.out, T(0));
                    for (std::size_t j = 0; j < s.out; ++j) {
                        T mean = T(0);
                        for (std::size_t i = 0; i < m; ++i) mean += lc.pre[i * s.out + j];
                        mean /= static_cast<T>(m);
                        T var = T(0);
                        for (std::size_t i = 0; i < m; ++i) {
                            const T d = lc.pre[i * s.out + j] - mean;
                            var += d * d;
                        }
                        var /= static_cast<T>(m);
                        lc.batch_mean[j] = mean;
                        lc.batch_var[j] = var;
                        lc.inv_std[j] = T(1) / std::sqrt(var + eps);
                    }
                } else {
                    const auto& rv = p.tensors[s.var];
                    for (std::size_t j = 0; j < s.out; ++j) lc.inv_std[j] = T(1) / std::sqrt(rv[j] + eps);
                }
                const auto& centre = training ? lc.batch_mean : p.tensors[s.mean];
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t j = 0; j < s.out; ++j) {
                        const std::size_t k = i * s.out + j;
                        lc.xhat[k] = (lc.pre[k] - centre[j]) * lc.inv_std[j];
                        y[k] = gamma[j] * lc.xhat[k] + beta[j];
                    }
                }
            }
            for (T& v : y) v = v > T(0) ? v : T(0);
            lc.output = std::move(y);
        }
        x = lc.output;
        cache.layers.push_back(std::move(lc));
    }

    const std::size_t classes = p.layout.back().out;
    cache.probs.assign(m * classes, T(0));
    kernels::softmax_rows<T>(cache.layers.back().output, cache.probs, m, classes);
    return cache;
}

// Mean cross-entropy of the cached probabilities.
template <typename T>
T mean_loss(const Cache<T>& cache, std::span<const std::size_t> labels) {
    if (cache.rows == 0) return T(0);
    const std::size_t classes = cache.probs.size() / cache.rows;
    T total = T(0);
    for (std::size_t i = 0; i < cache.rows; ++i) {
        total += std::log(cache.probs[i * classes + labels[i]] + static_cast<T>(kCrossEntropyEpsilon));
    }
    return -total / static_cast<T>(cache.rows);
}

// Gradient of the mean cross-entropy with respect to every slot (zeros for running stats).
template <typename T>
std::vector<std::vector<T>> backward(const Params<T>& p, const Cache<T>& cache, std::span<const std::size_t> labels) {
    const std::size_t m = cache.rows;
    std::vector<std::vector<T>> grads;
    for (const auto& t : p.tensors) grads.emplace_back(t.size(), T(0));
    if (m == 0) return grads;

    const std::size_t classes = p.layout.back().out;
    // d/dz of -ln(p_y + eps) is (p_y / (p_y + eps)) * (p - onehot(y)).
    std::vector<T> upstream = cache.probs;
    for (std::size_t i = 0; i < m; ++i) {
        const T p_true = cache.probs[i * classes + labels[i]];
        const T weight = p_true / (p_true + static_cast<T>(kCrossEntropyEpsilon)) / static_cast<T>(m);
        upstream[i * classes + labels[i]] -= T(1);
        for (std::size_t j = 0; j < classes; ++j) upstream[i * classes + j] *= weight;
    }

    for (std::size_t l = p.layout.size(); l-- > 0;) {
        const LayerSlots& s = p.layout[l];
        const LayerCache<T>& lc = cache.layers[l];
        const bool head = l + 1 == p.layout.size();
        std::vector<T> dz = std::move(upstream);

        if (!head) {
            for (std::size_t k = 0; k < dz.size(); ++k) {
                if (!(lc.output[k] > T(0))) dz[k] = T(0);
            }
            if (s.bn()) {
                const auto& gamma = p.tensors[s.gamma];
                auto& dgamma = grads[s.gamma];
                auto& dbeta = grads[s.beta];
                std::vector<T> dxhat(dz.size());
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t j = 0; j < s.out; ++j) {
                        const std::size_t k = i * s.out + j;
                        dgamma[j] += dz[k] * lc.xhat[k];
                        dbeta[j] += dz[k];
                        dxhat[k] = dz[k] * gamma[j];
                    }
                }
                if (cache.training) {
                    for (std::size_t j = 0; j < s.out; ++j) {
                        T sum = T(0), dot = T(0);
                        for (std::size_t i = 0; i < m; ++i) {
                            sum += dxhat[i * s.out + j];
                            dot += dxhat[i * s.out + j] * lc.xhat[i * s.out + j];
                        }
                        const T scale = lc.inv_std[j] / static_cast<T>(m);
                        for (std::size_t i = 0; i < m; ++i) {
                            const std::size_t k = i * s.out + j;
                            dz[k] = scale * (static_cast<T>(m) * dxhat[k] - sum - lc.xhat[k] * dot);
                        }
                    }
                } else {
                    for (std::size_t i = 0; i < m; ++i) {
                        for (std::size_t j = 0; j < s.out; ++j) dz[i * s.out + j] = dxhat[i * s.out + j] * lc.inv_std[j];
                    }
                }
            }
        }

        kernels::matmul_at<T>(dz, lc.input, grads[s.weight], m, s.out, s.in);
        auto& dbias = grads[s.bias];
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < s.out; ++j) dbias[j] += dz[i * s.out + j];
        }
        if (l > 0) {
            upstream.assign(m * s.in, T(0));
            kernels::matmul<T>(dz, p.tensors[s.weight], upstream, m, s.out, s.in);
        }
    }
    return grads;
}

}  // namespace supersub::detail
