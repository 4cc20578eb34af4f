#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "supersub/dataset.hpp"
#include "supersub/delta.hpp"
#include "supersub/hierarchy.hpp"
#include "supersub/network.hpp"

namespace supersub {

struct Prediction {
    std::size_t superclass = 0;
    std::size_t subclass = 0;  // global index

    friend bool operator==(const Prediction&, const Prediction&) = default;
};

// Argmax of one row of logits, ties to the lowest index.
std::size_t argmax(std::span<const float> logits);

// Vanilla registry: the router and every specialist resident at once.
class ModelRegistry {
public:
    // Throws ContractError unless there is one specialist per superclass with a head as wide
    // as that superclass's subclass list.
    ModelRegistry(Network super_net, std::vector<Network> specialists, HierarchyManifest manifest);

    Prediction infer(std::span<const float> x) const;
    // Stage 2 only, routed by a known superclass.
    std::size_t infer_within(std::size_t superclass, std::span<const float> x) const;

    const Network& super_net() const noexcept { return super_; }
    const Network& specialist(std::size_t i) const { return specialists_.at(i); }
    const HierarchyManifest& manifest() const noexcept { return manifest_; }
    std::size_t total_model_bytes() const;

private:
    Network super_;
    std::vector<Network> specialists_;
    HierarchyManifest manifest_;
};

// Where packed deltas live between requests. read() models a storage load.
class DeltaStorage {
public:
    virtual ~DeltaStorage() = default;
    virtual std::size_t count() const = 0;
    virtual Bytes read(std::size_t superclass) const = 0;
};

class MemoryDeltaStorage final : public DeltaStorage {
public:
    explicit MemoryDeltaStorage(std::vector<PackedDelta> packs) : packs_(std::move(packs)) {}
    std::size_t count() const override { return packs_.size(); }
    Bytes read(std::size_t superclass) const override { return packs_.at(superclass).bytes; }

private:
    std::vector<PackedDelta> packs_;
};

class FileDeltaStorage final : public DeltaStorage {
public:
    explicit FileDeltaStorage(std::vector<std::filesystem::path> paths);
    std::size_t count() const override { return paths_.size(); }
    Bytes read(std::size_t superclass) const override;

private:
    std::vector<std::filesystem::path> paths_;
};

struct CostLedger {
    std::uint64_t bytes_loaded = 0;
    std::uint64_t peak_resident_bytes = 0;
    std::uint64_t reconstruction_adds = 0;
    std::uint64_t specialist_switches = 0;

    friend bool operator==(const CostLedger&, const CostLedger&) = default;
};

// Efficient session: the router stays resident; a specialist is rebuilt from its packed
// delta whenever routing switches superclass. With the cache enabled the last rebuilt
// specialist is kept, so repeated queries to one superclass cost nothing.
class EfficientSession {
public:
    EfficientSession(std::shared_ptr<const Network> super_net, std::shared_ptr<const DeltaStorage> storage,
                     HierarchyManifest manifest, bool cache_enabled = true);

    struct Result {
        Prediction prediction;
        CostLedger charged;  // increments caused by this query; peak is the running peak
    };

    Result infer(std::span<const float> x);

    const CostLedger& ledger() const noexcept { return ledger_; }
    const HierarchyManifest& manifest() const noexcept { return manifest_; }
    std::size_t super_bytes() const noexcept { return super_bytes_; }

private:
    void note_resident(std::uint64_t bytes);

    std::shared_ptr<const Network> super_;
    std::shared_ptr<const DeltaStorage> storage_;
    HierarchyManifest manifest_;
    bool cache_enabled_;
    std::uint64_t super_bytes_;
    std::optional<std::size_t> cached_id_;
    std::optional<Network> cached_;
    CostLedger ledger_;
};

enum class EvalMode { Lowerbound, UpperboundOracle, TwoStageVanilla, TwoStageEfficient };

const char* eval_mode_name(EvalMode mode) noexcept;
EvalMode parse_eval_mode(const std::string& text);

using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

// counts[i][j] = #{true = i, predicted = j}.
ConfusionMatrix confusion_matrix(std::span<const std::size_t> pred_supers, std::span<const std::size_t> true_supers,
                                 std::size_t n_super);

struct EvalReport {
    std::string mode;
    std::vector<std::string> superclass_names;
    std::vector<double> per_super_accuracy;  // percent, subclass accuracy within each true superclass
    std::vector<std::size_t> per_super_count;
    double average_accuracy = 0.0;           // macro: mean of per_super_accuracy
    double micro_accuracy = 0.0;
    double stage1_accuracy = 0.0;            // superclass accuracy of the emitted predictions
    ConfusionMatrix confusion;
    std::size_t n_test = 0;
    std::vector<Prediction> predictions;
    std::optional<CostLedger> ledger;
};

// Builds the report from per-row predictions against the test labels.
EvalReport summarize(const std::string& mode, const Dataset& test, std::vector<Prediction> predictions);

struct EvalModels {
    const Network* lowerbound = nullptr;
    const ModelRegistry* registry = nullptr;
    EfficientSession* session = nullptr;
};

// Throws ContractError when the models needed by `mode` are missing or inconsistent.
EvalReport evaluate(EvalMode mode, const EvalModels& models, const Dataset& test);

}  // namespace supersub
