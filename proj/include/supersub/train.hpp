#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "supersub/dataset.hpp"
#include "supersub/detail/engine.hpp"
#include "supersub/network.hpp"
#include "supersub/quant.hpp"

namespace supersub {

struct ForwardCache {
    detail::Params<float> params;  // the effective parameters the pass ran with
    detail::Cache<float> cache;
};

struct ForwardResult {
    Tensor logits;
    ForwardCache cache;
};

// Batch norm uses batch statistics when training and running statistics otherwise.
// Pure: running statistics are updated separately by update_running_stats.
ForwardResult forward(const Network& net, const Tensor& batch, bool training);

// Gradients of the mean cross-entropy, one tensor per slot (zero for running statistics).
struct Gradients {
    std::vector<Tensor> tensors;
};

Gradients backward(const Network& net, const ForwardCache& cache, std::span<const std::size_t> labels);

// theta <- theta - lr * g for every trainable tensor; running statistics untouched.
Network sgd_step(const Network& net, const Gradients& grads, float lr);

// running <- momentum * running + (1 - momentum) * batch statistic (unbiased variance).
void update_running_stats(Network& net, const ForwardCache& cache);

enum class LabelView { Superclass, SubclassOf, AllSubclasses };

struct LabelSpec {
    LabelView view = LabelView::Superclass;
    std::size_t superclass = 0;  // SubclassOf only

    static LabelSpec super() { return {LabelView::Superclass, 0}; }
    static LabelSpec subclass_of(std::size_t i) { return {LabelView::SubclassOf, i}; }
    static LabelSpec all_subclasses() { return {LabelView::AllSubclasses, 0}; }
};

std::size_t label_space_size(const HierarchyManifest& manifest, LabelSpec spec);

// Rows and labels seen by a network trained under `spec`.
struct LabeledData {
    Tensor features;
    std::vector<std::size_t> labels;
};
LabeledData select_labels(const Dataset& ds, LabelSpec spec);

struct TrainConfig {
    float lr = 0.01f;
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    bool qat = false;
    int qat_bits = 8;

    void validate() const;
};

struct TrainResult {
    Network net;
    std::vector<double> loss_history;  // mean training loss per epoch
};

// Forward-effective parameters under QAT: trainable tensors snapped to their grids. Body
// tensors use `shared_body` when given, otherwise a grid fitted to the current values.
Network qat_effective(const Network& master, int bits, const NetworkGrids* shared_body = nullptr);

// Mini-batch SGD with a seeded per-epoch shuffle. With config.qat every forward pass runs on
// qat_effective(master) and gradients update the full-precision master unchanged.
TrainResult train(const Network& net, const Dataset& ds, LabelSpec spec, const TrainConfig& config,
                  const NetworkGrids* shared_body = nullptr);

// Copies the body of `super_net`, installs a fresh He-initialized head of width k_i, and
// trains everything on superclass i with local labels.
TrainResult finetune_from_super(const Network& super_net, std::size_t superclass, const Dataset& ds,
                                const TrainConfig& config, const NetworkGrids* shared_body = nullptr);

// Max relative error between analytic gradients and central differences, evaluated in
// double precision over every trainable parameter.
double gradient_check(const Network& net, const Tensor& batch, std::span<const std::size_t> labels, double eps,
                      bool training = true);

// Argmax per row, ties to the lowest index.
std::vector<std::size_t> predict(const Network& net, const Tensor& batch);

}  // namespace supersub
