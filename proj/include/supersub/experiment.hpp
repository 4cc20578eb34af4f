#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "supersub/dataset.hpp"
#include "supersub/delta.hpp"
#include "supersub/network.hpp"
#include "supersub/report.hpp"
#include "supersub/runtime.hpp"
#include "supersub/train.hpp"

namespace supersub {

enum class SpecialistSource { Finetuned, Scratch };

struct ExperimentConfig {
    std::optional<SyntheticSpec> synthetic;  // either this or the two dataset paths
    std::filesystem::path train_path;
    std::filesystem::path test_path;
    std::vector<std::size_t> hidden{64, 64};
    bool batchnorm = true;
    TrainConfig super_train;
    TrainConfig sub_train;
    TrainConfig finetune_train;
    TrainConfig lowerbound_train;
    DeltaMode delta_mode = DeltaMode::Fp16;
    int qat_bits = 8;
    SpecialistSource specialists = SpecialistSource::Finetuned;
    bool cache = true;
    std::uint64_t seed = 0;
    std::filesystem::path out = "run";

    // Throws ParameterError on inconsistent settings.
    void validate() const;
};

// Unknown keys are rejected so typos surface as config errors.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Child seed for one pipeline stage.
enum class Stage : std::uint64_t {
    Data = 0xDA7A000000000000ull,
    Super = 0x5E9E000000000000ull,
    Scratch = 0x5C2A000000000000ull,
    Finetune = 0xF17E000000000000ull,
    Lowerbound = 0x10B0000000000000ull,
};
std::uint64_t stage_seed(std::uint64_t seed, Stage stage, std::uint64_t index = 0);

// Run directory layout.
struct RunPaths {
    std::filesystem::path root;

    std::filesystem::path train_data() const { return root / "data" / "train.hsds"; }
    std::filesystem::path test_data() const { return root / "data" / "test.hsds"; }
    std::filesystem::path model(const std::string& name) const { return root / "models" / (name + ".hsnw"); }
    std::filesystem::path loss(const std::string& name) const { return root / "models" / (name + "_loss.csv"); }
    std::filesystem::path delta(std::size_t i) const { return root / "deltas" / ("delta_" + std::to_string(i) + ".hsdl"); }
    std::filesystem::path eval(const std::string& file) const { return root / "eval" / file; }
    std::filesystem::path report(const std::string& file) const { return root / "report" / file; }
};

// Parsed `super`, `lowerbound` or `sub:<i>`.
struct TrainTarget {
    enum class Kind { Super, Sub, Lowerbound } kind = Kind::Super;
    std::size_t index = 0;
};
TrainTarget parse_train_target(const std::string& text);

struct PackSummary {
    std::size_t superclass = 0;
    DeltaMode mode = DeltaMode::Fp16;
    std::size_t raw_bytes = 0;
    std::size_t packed_bytes = 0;
    std::size_t reference_bytes = 0;
    double ratio = 0.0;
};

struct Summary {
    GapReport gap;
    std::vector<CompressionRow> compression;
    std::string text;
    std::string csv;
};

void cmd_gen_data(const ExperimentConfig& config);
TrainResult cmd_train(const ExperimentConfig& config, TrainTarget target);
TrainResult cmd_finetune(const ExperimentConfig& config, std::size_t superclass);
PackSummary cmd_pack(const ExperimentConfig& config, std::size_t superclass);
// Rebuilds the specialist from its delta and writes models/reconstructed_<i>.hsnw.
Network cmd_unpack(const ExperimentConfig& config, std::size_t superclass);
EvalReport cmd_eval(const ExperimentConfig& config, EvalMode mode);
// Throws ContractError naming every missing artifact.
Summary cmd_report(const std::filesystem::path& run_dir);

// gen-data, every training stage, pack and unpack for all superclasses, all four eval modes
// and the report.
Summary run_pipeline(const ExperimentConfig& config);

}  // namespace supersub
