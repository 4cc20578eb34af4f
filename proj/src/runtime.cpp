#include "supersub/runtime.hpp"

#include <numeric>

#include "supersub/error.hpp"
#include "supersub/train.hpp"

namespace supersub {

namespace {

std::vector<float> logits_of(const Network& net, std::span<const float> x) {
    if (x.size() != net.input_dim()) {
        throw DimensionError("feature width " + std::to_string(x.size()) + " does not match network input " +
                             std::to_string(net.input_dim()));
    }
    const Tensor row({1, x.size()}, std::vector<float>(x.begin(), x.end()));
    const ForwardResult fwd = forward(net, row, false);
    return fwd.logits.values();
}

void check_specialist(const HierarchyManifest& manifest, std::size_t i, const Network& net, std::size_t input_dim) {
    if (net.head_dim() != manifest.subclass_count(i)) {
        throw ContractError("specialist " + std::to_string(i) + " has head width " + std::to_string(net.head_dim()) +
                            " but superclass has " + std::to_string(manifest.subclass_count(i)) + " subclasses");
    }
    if (net.input_dim() != input_dim) throw ContractError("specialist " + std::to_string(i) + " input width differs");
}

}  // namespace

std::size_t argmax(std::span<const float> logits) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.size(); ++j) {
        if (logits[j] > logits[best]) best = j;
    }
    return best;
}

ModelRegistry::ModelRegistry(Network super_net, std::vector<Network> specialists, HierarchyManifest manifest)
    : super_(std::move(super_net)), specialists_(std::move(specialists)), manifest_(std::move(manifest)) {
    if (super_.head_dim() != manifest_.superclass_count()) {
        throw ContractError("router head width " + std::to_string(super_.head_dim()) + " does not match " +
                            std::to_string(manifest_.superclass_count()) + " superclasses");
    }
    if (specialists_.size() != manifest_.superclass_count()) {
        throw ContractError("registry needs one specialist per superclass: have " +
                            std::to_string(specialists_.size()) + ", need " +
                            std::to_string(manifest_.superclass_count()));
    }
    for (std::size_t i = 0; i < specialists_.size(); ++i) check_specialist(manifest_, i, specialists_[i], super_.input_dim());
}

Prediction ModelRegistry::infer(std::span<const float> x) const {
    const std::size_t s = argmax(logits_of(super_, x));
    return {s, infer_within(s, x)};
}

std::size_t ModelRegistry::infer_within(std::size_t superclass, std::span<const float> x) const {
    const std::size_t local = argmax(logits_of(specialists_.at(superclass), x));
    return manifest_.global_index(superclass, local);
}

std::size_t ModelRegistry::total_model_bytes() const {
    std::size_t total = network_file_bytes(super_);
    for (const auto& s : specialists_) total += network_file_bytes(s);
    return total;
}

FileDeltaStorage::FileDeltaStorage(std::vector<std::filesystem::path> paths) : paths_(std::move(paths)) {
    for (const auto& p : paths_) {
        if (!std::filesystem::exists(p)) throw ContractError("missing delta file " + p.string());
    }
}

Bytes FileDeltaStorage::read(std::size_t superclass) const { return read_file(paths_.at(superclass)); }

EfficientSession::EfficientSession(std::shared_ptr<const Network> super_net, std::shared_ptr<const DeltaStorage> storage,
                                   HierarchyManifest manifest, bool cache_enabled)
    : super_(std::move(super_net)),
      storage_(std::move(storage)),
      manifest_(std::move(manifest)),
      cache_enabled_(cache_enabled),
      super_bytes_(network_file_bytes(*super_)) {
    if (super_->head_dim() != manifest_.superclass_count()) {
        throw ContractError("router head width does not match the manifest");
    }
    if (storage_->count() != manifest_.superclass_count()) {
        throw ContractError("efficient session needs one packed delta per superclass: have " +
                            std::to_string(storage_->count()) + ", need " +
                            std::to_string(manifest_.superclass_count()));
    }
    note_resident(super_bytes_);
}

void EfficientSession::note_resident(std::uint64_t bytes) {
    ledger_.peak_resident_bytes = std::max(ledger_.peak_resident_bytes, bytes);
}

EfficientSession::Result EfficientSession::infer(std::span<const float> x) {
    const CostLedger before = ledger_;
    const std::size_t s = argmax(logits_of(*super_, x));

    if (!cached_ || *cached_id_ != s) {
        cached_.reset();
        cached_id_.reset();
        const Bytes packed = storage_->read(s);
        ledger_.bytes_loaded += packed.size();
        note_resident(super_bytes_ + packed.size());

        const DeltaPack delta = unpack(packed);
        if (delta.superclass_id != s) {
            throw ContractError("delta slot " + std::to_string(s) + " holds superclass " +
                                std::to_string(delta.superclass_id));
        }
        Network specialist = reconstruct(*super_, delta);
        check_specialist(manifest_, s, specialist, super_->input_dim());
        ledger_.reconstruction_adds += delta.add_elements();
        ledger_.specialist_switches += 1;
        note_resident(super_bytes_ + packed.size() + network_file_bytes(specialist));
        cached_ = std::move(specialist);
        cached_id_ = s;
    }

    const std::size_t local = argmax(logits_of(*cached_, x));
    Result result{{s, manifest_.global_index(s, local)}, {}};
    if (!cache_enabled_) {
        cached_.reset();
        cached_id_.reset();
    }
    result.charged.bytes_loaded = ledger_.bytes_loaded - before.bytes_loaded;
    result.charged.reconstruction_adds = ledger_.reconstruction_adds - before.reconstruction_adds;
    result.charged.specialist_switches = ledger_.specialist_switches - before.specialist_switches;
    result.charged.peak_resident_bytes = ledger_.peak_resident_bytes;
    return result;
}

const char* eval_mode_name(EvalMode mode) noexcept {
    switch (mode) {
        case EvalMode::Lowerbound: return "lowerbound";
        case EvalMode::UpperboundOracle: return "upperbound_oracle";
        case EvalMode::TwoStageVanilla: return "two_stage_vanilla";
        case EvalMode::TwoStageEfficient: return "two_stage_efficient";
    }
    return "?";
}

EvalMode parse_eval_mode(const std::string& text) {
    for (auto m : {EvalMode::Lowerbound, EvalMode::UpperboundOracle, EvalMode::TwoStageVanilla,
                   EvalMode::TwoStageEfficient}) {
        if (text == eval_mode_name(m)) return m;
    }
    throw ParameterError("unknown eval mode \"" + text + "\"");
}

ConfusionMatrix confusion_matrix(std::span<const std::size_t> pred_supers, std::span<const std::size_t> true_supers,
                                 std::size_t n_super) {
    if (pred_supers.size() != true_supers.size()) {
        throw ContractError("confusion_matrix: " + std::to_string(pred_supers.size()) + " predictions for " +
                            std::to_string(true_supers.size()) + " labels");
    }
    ConfusionMatrix counts(n_super, std::vector<std::size_t>(n_super, 0));
    for (std::size_t k = 0; k < pred_supers.size(); ++k) {
        if (pred_supers[k] >= n_super || true_supers[k] >= n_super) {
            throw IndexError("confusion_matrix: superclass label out of range at position " + std::to_string(k));
        }
        ++counts[true_supers[k]][pred_supers[k]];
    }
    return counts;
}

EvalReport summarize(const std::string& mode, const Dataset& test, std::vector<Prediction> predictions) {
    if (predictions.size() != test.rows()) throw ContractError("summarize: prediction count mismatch");
    const HierarchyManifest& m = test.manifest;
    const std::size_t n_super = m.superclass_count();
    EvalReport r;
    r.mode = mode;
    r.n_test = test.rows();
    r.per_super_count.assign(n_super, 0);
    std::vector<std::size_t> correct(n_super, 0);
    std::vector<std::size_t> pred_supers, true_supers;
    std::size_t total_correct = 0, super_correct = 0;
    for (std::size_t k = 0; k < test.rows(); ++k) {
        const std::size_t truth = test.sub_labels[k];
        const std::size_t ts = m.super_of(truth);
        const Prediction& p = predictions[k];
        if (m.super_of(p.subclass) != p.superclass) {
            throw ContractError("prediction " + std::to_string(k) + " emits a subclass outside its superclass");
        }
        ++r.per_super_count[ts];
        if (p.subclass == truth) {
            ++correct[ts];
            ++total_correct;
        }
        super_correct += p.superclass == ts;
        pred_supers.push_back(p.superclass);
        true_supers.push_back(ts);
    }
    for (std::size_t s = 0; s < n_super; ++s) {
        r.superclass_names.push_back(m.superclass_name(s));
        r.per_super_accuracy.push_back(r.per_super_count[s] ? 100.0 * static_cast<double>(correct[s]) /
                                                                  static_cast<double>(r.per_super_count[s])
                                                            : 0.0);
    }
    r.average_accuracy = std::accumulate(r.per_super_accuracy.begin(), r.per_super_accuracy.end(), 0.0) /
                         static_cast<double>(n_super);
    if (r.n_test) {
        r.micro_accuracy = 100.0 * static_cast<double>(total_correct) / static_cast<double>(r.n_test);
        r.stage1_accuracy = 100.0 * static_cast<double>(super_correct) / static_cast<double>(r.n_test);
    }
    r.confusion = confusion_matrix(pred_supers, true_supers, n_super);
    r.predictions = std::move(predictions);
    return r;
}

EvalReport evaluate(EvalMode mode, const EvalModels& models, const Dataset& test) {
    test.validate();
    const std::size_t d = test.dim();
    auto row = [&](std::size_t k) { return test.features.data().subspan(k * d, d); };
    std::vector<Prediction> preds;
    preds.reserve(test.rows());

    switch (mode) {
        case EvalMode::Lowerbound: {
            if (!models.lowerbound) throw ContractError("lowerbound evaluation needs the all-subclasses network");
            if (models.lowerbound->head_dim() != test.manifest.subclass_count()) {
                throw ContractError("lowerbound network head does not cover every subclass");
            }
            if (test.rows() > 0) {
                for (auto sub : predict(*models.lowerbound, test.features)) {
                    preds.push_back({test.manifest.super_of(sub), sub});
                }
            }
            return summarize(eval_mode_name(mode), test, std::move(preds));
        }
        case EvalMode::UpperboundOracle:
        case EvalMode::TwoStageVanilla: {
            if (!models.registry) throw ContractError(std::string(eval_mode_name(mode)) + " needs a model registry");
            if (!(models.registry->manifest() == test.manifest)) throw ContractError("registry manifest differs from test set");
            for (std::size_t k = 0; k < test.rows(); ++k) {
                if (mode == EvalMode::TwoStageVanilla) {
                    preds.push_back(models.registry->infer(row(k)));
                } else {
                    const std::size_t s = test.manifest.super_of(test.sub_labels[k]);
                    preds.push_back({s, models.registry->infer_within(s, row(k))});
                }
            }
            return summarize(eval_mode_name(mode), test, std::move(preds));
        }
        case EvalMode::TwoStageEfficient: {
            if (!models.session) throw ContractError("two_stage_efficient needs an efficient session");
            if (!(models.session->manifest() == test.manifest)) throw ContractError("session manifest differs from test set");
            for (std::size_t k = 0; k < test.rows(); ++k) preds.push_back(models.session->infer(row(k)).prediction);
            EvalReport r = summarize(eval_mode_name(mode), test, std::move(preds));
            r.ledger = models.session->ledger();
            return r;
        }
    }
    throw ContractError("unknown evaluation mode");
}

}  // namespace supersub
