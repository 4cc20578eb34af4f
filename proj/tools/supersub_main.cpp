#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "supersub/error.hpp"
#include "supersub/experiment.hpp"

using namespace supersub;

namespace {

constexpr int kOk = 0;
constexpr int kUserError = 2;
constexpr int kIntegrityError = 3;

struct Globals {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

ExperimentConfig resolve(const Globals& g) {
    if (g.config.empty()) throw ParameterError("--config is required for this command");
    ExperimentConfig c = load_config(g.config);
    if (!g.out.empty()) c.out = g.out;
    if (g.seed) c.seed = *g.seed;
    return c;
}

std::size_t parse_index(const std::string& text, const char* what) {
    try {
        std::size_t pos = 0;
        const auto v = std::stoull(text, &pos);
        if (pos == text.size() && text.find('-') == std::string::npos) return v;
    } catch (const std::logic_error&) {
    }
    throw ParameterError(fmt::format("{} must be a non-negative integer, got \"{}\"", what, text));
}

void print_eval(const EvalReport& r) {
    fmt::print("{}: macro {:.2f}%  micro {:.2f}%  stage-1 {:.2f}%  n_test {}\n", r.mode, r.average_accuracy,
               r.micro_accuracy, r.stage1_accuracy, r.n_test);
    if (r.ledger) {
        fmt::print("ledger: bytes_loaded {}  peak_resident_bytes {}  reconstruction_adds {}  switches {}\n",
                   r.ledger->bytes_loaded, r.ledger->peak_resident_bytes, r.ledger->reconstruction_adds,
                   r.ledger->specialist_switches);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage superclass/subclass classification pipeline"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "Experiment config (JSON)");
    app.add_option("--out", g.out, "Run directory (overrides the config)");
    app.add_option("--seed", g.seed, "Root seed (overrides the config)");
    app.fallthrough();

    auto* gen = app.add_subcommand("gen-data", "Write train/test datasets");
    std::string target;
    auto* trn = app.add_subcommand("train", "Train super, lowerbound or sub:<i>");
    trn->add_option("target", target, "super | lowerbound | sub:<i>")->required();
    std::string index;
    auto* ft = app.add_subcommand("finetune", "Finetune specialist <i> from the superclass network");
    ft->add_option("superclass", index)->required();
    auto* pk = app.add_subcommand("pack", "Write the packed delta for specialist <i>");
    pk->add_option("superclass", index)->required();
    auto* up = app.add_subcommand("unpack", "Rebuild specialist <i> from its delta");
    up->add_option("superclass", index)->required();
    std::string mode;
    auto* ev = app.add_subcommand("eval", "Evaluate one mode");
    ev->add_option("mode", mode, "lowerbound | upperbound_oracle | two_stage_vanilla | two_stage_efficient")
        ->required();
    auto* rp = app.add_subcommand("report", "Summarize a finished run directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUserError;
    }

    try {
        if (gen->parsed()) {
            const ExperimentConfig c = resolve(g);
            cmd_gen_data(c);
            fmt::print("wrote {} and {}\n", RunPaths{c.out}.train_data().string(), RunPaths{c.out}.test_data().string());
        } else if (trn->parsed()) {
            const ExperimentConfig c = resolve(g);
            const TrainResult r = cmd_train(c, parse_train_target(target));
            fmt::print("trained {}: final loss {:.6f} over {} epochs\n", target,
                       r.loss_history.empty() ? 0.0 : r.loss_history.back(), r.loss_history.size());
        } else if (ft->parsed()) {
            const ExperimentConfig c = resolve(g);
            const TrainResult r = cmd_finetune(c, parse_index(index, "superclass"));
            fmt::print("finetuned ft_{}: final loss {:.6f} over {} epochs\n", index,
                       r.loss_history.empty() ? 0.0 : r.loss_history.back(), r.loss_history.size());
        } else if (pk->parsed()) {
            const ExperimentConfig c = resolve(g);
            const PackSummary s = cmd_pack(c, parse_index(index, "superclass"));
            fmt::print("delta {} ({}): raw {} bytes, packed {} bytes, reference {} bytes, ratio {:.4f}\n", s.superclass,
                       mode_name(s.mode), s.raw_bytes, s.packed_bytes, s.reference_bytes, s.ratio);
        } else if (up->parsed()) {
            const ExperimentConfig c = resolve(g);
            const std::size_t i = parse_index(index, "superclass");
            cmd_unpack(c, i);
            fmt::print("wrote {}\n", RunPaths{c.out}.model("reconstructed_" + std::to_string(i)).string());
        } else if (ev->parsed()) {
            const ExperimentConfig c = resolve(g);
            print_eval(cmd_eval(c, parse_eval_mode(mode)));
        } else if (rp->parsed()) {
            std::filesystem::path dir = g.out;
            if (dir.empty()) {
                if (g.config.empty()) throw ParameterError("report needs --out or --config");
                dir = load_config(g.config).out;
            }
            std::cout << cmd_report(dir).text;
        }
    } catch (const IntegrityError& e) {
        fmt::print(stderr, "integrity error: {}\n", e.what());
        return kIntegrityError;
    } catch (const Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kUserError;
    } catch (const std::filesystem::filesystem_error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kUserError;
    }
    return kOk;
}
