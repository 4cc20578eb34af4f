#include "supersub/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "supersub/error.hpp"
#include "supersub/prng.hpp"

namespace supersub {

namespace detail {

std::vector<LayerSlots> layer_slots(const Network& net) {
    std::vector<LayerSlots> layout(net.layers().size());
    for (std::size_t i = 0; i < net.slots().size(); ++i) {
        const TensorSlot& s = net.slots()[i];
        LayerSlots& ls = layout[s.layer];
        switch (s.role) {
            case TensorRole::Weight: ls.weight = i; break;
            case TensorRole::Bias: ls.bias = i; break;
            case TensorRole::BnGamma: ls.gamma = i; break;
            case TensorRole::BnBeta: ls.beta = i; break;
            case TensorRole::BnRunningMean: ls.mean = i; break;
            case TensorRole::BnRunningVar: ls.var = i; break;
        }
    }
    for (std::size_t l = 0; l < layout.size(); ++l) {
        layout[l].in = net.config().layer_dims[l];
        layout[l].out = net.config().layer_dims[l + 1];
    }
    return layout;
}

}  // namespace detail

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348'5546'464c'4500ull;
constexpr std::uint64_t kHeadStream = 0x4845'4144'0000'0000ull;

void check_width(const Network& net, const Tensor& batch) {
    if (batch.rank() != 2 || batch.shape()[1] != net.input_dim()) {
        throw DimensionError("batch shape " + shape_string(batch.shape()) + " does not match network input width " +
                             std::to_string(net.input_dim()));
    }
}

Tensor gather_rows(const Tensor& src, std::span<const std::size_t> rows) {
    const std::size_t d = src.shape()[1];
    Tensor out({rows.size(), d});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy_n(src.data().begin() + static_cast<std::ptrdiff_t>(rows[i] * d), d,
                    out.data().begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    return out;
}

}  // namespace

ForwardResult forward(const Network& net, const Tensor& batch, bool training) {
    check_width(net, batch);
    ForwardResult result;
    result.cache.params = detail::params_from<float>(net);
    result.cache.cache = detail::forward<float>(result.cache.params, batch.data(), batch.shape()[0], training);
    result.logits = Tensor({batch.shape()[0], net.head_dim()}, result.cache.cache.layers.back().output);
    return result;
}

Gradients backward(const Network& net, const ForwardCache& cache, std::span<const std::size_t> labels) {
    if (labels.size() != cache.cache.rows) {
        throw ContractError("backward: " + std::to_string(labels.size()) + " labels for a batch of " +
                            std::to_string(cache.cache.rows));
    }
    if (cache.params.tensors.size() != net.slots().size()) throw ContractError("backward: cache from another network");
    for (auto y : labels) {
        if (y >= net.head_dim()) throw ContractError("backward: label " + std::to_string(y) + " exceeds head width");
    }
    auto raw = detail::backward<float>(cache.params, cache.cache, labels);
    Gradients g;
    for (std::size_t i = 0; i < raw.size(); ++i) g.tensors.emplace_back(net.tensor(i).shape(), std::move(raw[i]));
    return g;
}

Network sgd_step(const Network& net, const Gradients& grads, float lr) {
    if (grads.tensors.size() != net.slots().size()) throw ContractError("sgd_step: gradient count mismatch");
    Network out = net;
    for (std::size_t i = 0; i < net.slots().size(); ++i) {
        if (grads.tensors[i].shape() != net.tensor(i).shape()) {
            throw ContractError("sgd_step: gradient shape mismatch for " + net.slots()[i].name);
        }
        if (!is_trainable(net.slots()[i].role)) continue;
        auto w = out.tensor(i).data();
        const auto g = grads.tensors[i].data();
        for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * g[k];
    }
    return out;
}

void update_running_stats(Network& net, const ForwardCache& cache) {
    const auto& c = cache.cache;
    if (!c.training) return;
    const float keep = kBatchNormMomentum;
    const float take = 1.0f - kBatchNormMomentum;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        auto& layer = net.layers()[l];
        if (!layer.bn) continue;
        const auto& lc = c.layers[l];
        const float correction = c.rows > 1 ? static_cast<float>(c.rows) / static_cast<float>(c.rows - 1) : 1.0f;
        auto mean = layer.bn->running_mean.data();
        auto var = layer.bn->running_var.data();
        for (std::size_t j = 0; j < mean.size(); ++j) {
            mean[j] = keep * mean[j] + take * lc.batch_mean[j];
            var[j] = keep * var[j] + take * lc.batch_var[j] * correction;
        }
    }
}

std::size_t label_space_size(const HierarchyManifest& manifest, LabelSpec spec) {
    switch (spec.view) {
        case LabelView::Superclass: return manifest.superclass_count();
        case LabelView::SubclassOf: return manifest.subclass_count(spec.superclass);
        case LabelView::AllSubclasses: return manifest.subclass_count();
    }
    return 0;
}

LabeledData select_labels(const Dataset& ds, LabelSpec spec) {
    switch (spec.view) {
        case LabelView::Superclass: return {ds.features, ds.super_labels()};
        case LabelView::AllSubclasses: return {ds.features, ds.sub_labels};
        case LabelView::SubclassOf: {
            LabeledData out;
            Dataset part = ds.restrict_to(spec.superclass, out.labels);
            out.features = std::move(part.features);
            return out;
        }
    }
    return {};
}

void TrainConfig::validate() const {
    if (!(lr > 0.0f)) throw ParameterError("train: lr must be > 0");
    if (batch_size == 0) throw ParameterError("train: batch_size must be >= 1");
    check_qat_bits(qat_bits);
}

Network qat_effective(const Network& master, int bits, const NetworkGrids* shared_body) {
    Network eff = master;
    std::size_t body = 0;
    for (std::size_t i = 0; i < master.slots().size(); ++i) {
        const TensorSlot& s = master.slots()[i];
        if (!s.head) ++body;
        if (!is_trainable(s.role)) continue;
        const bool shared = shared_body && !s.head;
        if (shared && body > shared_body->grids.size()) throw ContractError("qat: shared grids do not cover the body");
        eff.tensor(i) = shared ? fake_quantize(master.tensor(i), shared_body->grids[body - 1])
                               : fake_quantize(master.tensor(i), bits);
    }
    return eff;
}

TrainResult train(const Network& net, const Dataset& ds, LabelSpec spec, const TrainConfig& config,
                  const NetworkGrids* shared_body) {
    config.validate();
    ds.validate();
    const std::size_t classes = label_space_size(ds.manifest, spec);
    if (net.head_dim() != classes) {
        throw ContractError("train: head width " + std::to_string(net.head_dim()) + " does not match " +
                            std::to_string(classes) + " classes of the label view");
    }
    check_width(net, ds.features);

    const LabeledData data = select_labels(ds, spec);
    const std::size_t n = data.labels.size();
    TrainResult result{net, {}};
    if (config.epochs == 0 || n == 0) return result;

    Prng shuffle(Prng::derive(config.seed, kShuffleStream));
    std::vector<std::size_t> order(n);
    std::vector<std::size_t> batch_labels;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t count = std::min(config.batch_size, n - start);
            const std::span<const std::size_t> rows(order.data() + start, count);
            const Tensor batch = gather_rows(data.features, rows);
            batch_labels.clear();
            for (auto r : rows) batch_labels.push_back(data.labels[r]);

            const Network effective =
                config.qat ? qat_effective(result.net, config.qat_bits, shared_body) : result.net;
            ForwardResult fwd = forward(effective, batch, true);
            epoch_loss += static_cast<double>(detail::mean_loss<float>(fwd.cache.cache, batch_labels)) *
                          static_cast<double>(count);
            const Gradients grads = backward(effective, fwd.cache, batch_labels);
            result.net = sgd_step(result.net, grads, config.lr);
            update_running_stats(result.net, fwd.cache);
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(n));
    }
    return result;
}

TrainResult finetune_from_super(const Network& super_net, std::size_t superclass, const Dataset& ds,
                                const TrainConfig& config, const NetworkGrids* shared_body) {
    const std::size_t k = ds.manifest.subclass_count(superclass);
    Network start = super_net;
    start.replace_head(k);
    init_dense(start.head(), Prng::derive(config.seed, kHeadStream + superclass));
    return train(start, ds, LabelSpec::subclass_of(superclass), config, shared_body);
}

double gradient_check(const Network& net, const Tensor& batch, std::span<const std::size_t> labels, double eps,
                      bool training) {
    if (!(eps > 0.0)) throw ParameterError("gradient_check: eps must be > 0");
    check_width(net, batch);
    if (labels.size() != batch.shape()[0]) throw ContractError("gradient_check: label count mismatch");
    for (auto y : labels) {
        if (y >= net.head_dim()) throw ContractError("gradient_check: label exceeds head width");
    }
    // Extended precision keeps central-difference roundoff well below the tolerances.
    using Real = long double;
    const std::size_t m = batch.shape()[0];
    const std::vector<Real> x(batch.data().begin(), batch.data().end());
    const Real h = static_cast<Real>(eps);

    detail::Params<Real> p = detail::params_from<Real>(net);
    const auto analytic = detail::backward<Real>(p, detail::forward<Real>(p, x, m, training), labels);
    auto loss = [&]() { return detail::mean_loss<Real>(detail::forward<Real>(p, x, m, training), labels); };

    Real worst = 0;
    for (std::size_t i = 0; i < net.slots().size(); ++i) {
        if (!is_trainable(net.slots()[i].role)) continue;
        auto& values = p.tensors[i];
        for (std::size_t k = 0; k < values.size(); ++k) {
            const Real saved = values[k];
            values[k] = saved + h;
            const Real up = loss();
            values[k] = saved - h;
            const Real down = loss();
            values[k] = saved;
            const Real numeric = (up - down) / (2 * h);
            const Real a = analytic[i][k];
            const Real denom = std::max({std::fabs(a), std::fabs(numeric), Real(1e-8)});
            worst = std::max(worst, std::fabs(a - numeric) / denom);
        }
    }
    return static_cast<double>(worst);
}

std::vector<std::size_t> predict(const Network& net, const Tensor& batch) {
    const ForwardResult fwd = forward(net, batch, false);
    const std::size_t m = batch.shape()[0], n = net.head_dim();
    std::vector<std::size_t> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < n; ++j) {
            if (fwd.logits.at(i, j) > fwd.logits.at(i, best)) best = j;
        }
        out[i] = best;
    }
    return out;
}

}  // namespace supersub
