#include "supersub/experiment.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "supersub/error.hpp"
#include "supersub/quant.hpp"

namespace supersub {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ParameterError("config: " + where + " must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items()) {
        if (!ok.count(key)) throw ParameterError("config: unknown key \"" + key + "\" in " + where);
    }
}

template <typename T>
void read_opt(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

TrainConfig parse_train(const json& obj, const std::string& where) {
    check_keys(obj, where, {"lr", "epochs", "batch_size"});
    TrainConfig t;
    read_opt(obj, "lr", t.lr);
    read_opt(obj, "epochs", t.epochs);
    read_opt(obj, "batch_size", t.batch_size);
    return t;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const std::filesystem::path& path) {
    const Bytes b = read_file(path);
    return std::string(b.begin(), b.end());
}

void require(const std::filesystem::path& path, const char* what) {
    if (!std::filesystem::exists(path)) throw ContractError(fmt::format("missing {}: {}", what, path.string()));
}

Dataset load_train(const RunPaths& p) {
    require(p.train_data(), "training data (run gen-data first)");
    return load_dataset(p.train_data());
}

Dataset load_test(const RunPaths& p) {
    require(p.test_data(), "test data (run gen-data first)");
    return load_dataset(p.test_data());
}

Network load_model(const RunPaths& p, const std::string& name) {
    require(p.model(name), "model");
    return load_network(p.model(name));
}

void check_superclass(const Dataset& ds, std::size_t i) {
    if (i >= ds.manifest.superclass_count()) {
        throw ParameterError(fmt::format("superclass {} out of range: the hierarchy has {}", i,
                                         ds.manifest.superclass_count()));
    }
}

NetworkConfig network_config(const ExperimentConfig& c, std::size_t input, std::size_t output) {
    NetworkConfig n;
    n.layer_dims.push_back(input);
    n.layer_dims.insert(n.layer_dims.end(), c.hidden.begin(), c.hidden.end());
    n.layer_dims.push_back(output);
    n.batchnorm.assign(c.hidden.size(), c.batchnorm);
    n.validate();
    return n;
}

void save_loss(const RunPaths& p, const std::string& name, const std::vector<double>& history) {
    std::string csv = "epoch,loss\n";
    for (std::size_t e = 0; e < history.size(); ++e) csv += fmt::format("{},{:.9g}\n", e + 1, history[e]);
    write_text(p.loss(name), csv);
}

std::string specialist_name(const ExperimentConfig& c, std::size_t i) {
    return (c.specialists == SpecialistSource::Finetuned ? "ft_" : "sub_") + std::to_string(i);
}

// Macro accuracy and n_test from the summary row of an eval CSV.
GapEntry read_gap_entry(const std::filesystem::path& path, const std::string& mode) {
    std::istringstream in(read_text(path));
    std::string line;
    const std::string prefix = mode + ",macro_average,";
    while (std::getline(in, line)) {
        if (line.rfind(prefix, 0) != 0) continue;
        const std::string rest = line.substr(prefix.size());
        const auto comma = rest.find(',');
        if (comma == std::string::npos) break;
        try {
            return {mode, std::stod(rest.substr(0, comma)), std::stoull(rest.substr(comma + 1))};
        } catch (const std::logic_error&) {
            break;
        }
    }
    throw ValidationError("no macro_average row for " + mode + " in " + path.string());
}

}  // namespace

void ExperimentConfig::validate() const {
    if (synthetic) {
        synthetic->validate();
    } else if (train_path.empty() || test_path.empty()) {
        throw ParameterError("config: need either \"synthetic\" or both dataset paths");
    }
    if (hidden.empty()) throw ParameterError("config: network needs at least one hidden layer");
    for (const auto* t : {&super_train, &sub_train, &finetune_train, &lowerbound_train}) t->validate();
    check_qat_bits(qat_bits);
    if (out.empty()) throw ParameterError("config: output directory is empty");
}

ExperimentConfig parse_config(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParameterError(std::string("config: ") + e.what());
    }
    ExperimentConfig c;
    try {
        check_keys(doc, "config", {"seed", "out", "synthetic", "dataset", "network", "train", "delta", "specialists",
                                   "cache"});
        read_opt(doc, "seed", c.seed);
        if (doc.contains("out")) c.out = doc.at("out").get<std::string>();
        if (doc.contains("synthetic")) {
            const json& s = doc.at("synthetic");
            check_keys(s, "synthetic", {"n_super", "subs_per_super", "dim", "super_sep", "sub_sep", "noise_sigma",
                                        "n_train_per_sub", "n_test_per_sub"});
            SyntheticSpec spec;
            spec.n_super = s.at("n_super").get<std::size_t>();
            spec.subs_per_super = s.at("subs_per_super").get<std::vector<std::size_t>>();
            spec.dim = s.at("dim").get<std::size_t>();
            spec.super_sep = s.at("super_sep").get<double>();
            spec.sub_sep = s.at("sub_sep").get<double>();
            spec.noise_sigma = s.at("noise_sigma").get<double>();
            spec.n_train_per_sub = s.at("n_train_per_sub").get<std::size_t>();
            spec.n_test_per_sub = s.at("n_test_per_sub").get<std::size_t>();
            c.synthetic = spec;
        }
        if (doc.contains("dataset")) {
            if (c.synthetic) throw ParameterError("config: \"synthetic\" and \"dataset\" are exclusive");
            const json& d = doc.at("dataset");
            check_keys(d, "dataset", {"train", "test"});
            c.train_path = d.at("train").get<std::string>();
            c.test_path = d.at("test").get<std::string>();
        }
        if (doc.contains("network")) {
            const json& n = doc.at("network");
            check_keys(n, "network", {"hidden", "batchnorm"});
            read_opt(n, "hidden", c.hidden);
            read_opt(n, "batchnorm", c.batchnorm);
        }
        if (doc.contains("train")) {
            const json& t = doc.at("train");
            check_keys(t, "train", {"super", "subclass", "finetune", "lowerbound"});
            if (t.contains("super")) c.super_train = parse_train(t.at("super"), "train.super");
            if (t.contains("subclass")) c.sub_train = parse_train(t.at("subclass"), "train.subclass");
            if (t.contains("finetune")) c.finetune_train = parse_train(t.at("finetune"), "train.finetune");
            if (t.contains("lowerbound")) c.lowerbound_train = parse_train(t.at("lowerbound"), "train.lowerbound");
        }
        if (doc.contains("delta")) {
            const json& d = doc.at("delta");
            check_keys(d, "delta", {"mode", "qat_bits"});
            if (d.contains("mode")) c.delta_mode = parse_delta_mode(d.at("mode").get<std::string>());
            read_opt(d, "qat_bits", c.qat_bits);
        }
        if (doc.contains("specialists")) {
            const auto s = doc.at("specialists").get<std::string>();
            if (s == "finetuned") {
                c.specialists = SpecialistSource::Finetuned;
            } else if (s == "scratch") {
                c.specialists = SpecialistSource::Scratch;
            } else {
                throw ParameterError("config: specialists must be \"finetuned\" or \"scratch\"");
            }
        }
        read_opt(doc, "cache", c.cache);
    } catch (const json::exception& e) {
        throw ParameterError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    require(path, "config file");
    return parse_config(read_text(path));
}

std::uint64_t stage_seed(std::uint64_t seed, Stage stage, std::uint64_t index) {
    return seed ^ (static_cast<std::uint64_t>(stage) + index);
}

TrainTarget parse_train_target(const std::string& text) {
    if (text == "super") return {TrainTarget::Kind::Super, 0};
    if (text == "lowerbound") return {TrainTarget::Kind::Lowerbound, 0};
    if (text.rfind("sub:", 0) == 0 && text.size() > 4 &&
        std::all_of(text.begin() + 4, text.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
        try {
            return {TrainTarget::Kind::Sub, std::stoull(text.substr(4))};
        } catch (const std::out_of_range&) {
        }
    }
    throw ParameterError("train target must be super, lowerbound or sub:<i>, got \"" + text + "\"");
}

void cmd_gen_data(const ExperimentConfig& config) {
    const RunPaths p{config.out};
    if (config.synthetic) {
        SyntheticSpec spec = *config.synthetic;
        spec.seed = stage_seed(config.seed, Stage::Data);
        const SyntheticData data = generate_synthetic(spec);
        save_dataset(data.train, p.train_data());
        save_dataset(data.test, p.test_data());
    } else {
        require(config.train_path, "training dataset");
        require(config.test_path, "test dataset");
        const Dataset train = load_dataset(config.train_path);
        const Dataset test = load_dataset(config.test_path);
        if (!(train.manifest == test.manifest)) throw ValidationError("train and test hierarchies differ");
        save_dataset(train, p.train_data());
        save_dataset(test, p.test_data());
    }
}

TrainResult cmd_train(const ExperimentConfig& config, TrainTarget target) {
    const RunPaths p{config.out};
    const Dataset ds = load_train(p);
    const HierarchyManifest& m = ds.manifest;
    const bool qat = config.delta_mode == DeltaMode::QatInt;

    switch (target.kind) {
        case TrainTarget::Kind::Super: {
            const std::uint64_t s = stage_seed(config.seed, Stage::Super);
            TrainConfig tc = config.super_train;
            tc.seed = s;
            tc.qat = qat;
            tc.qat_bits = config.qat_bits;
            const Network init = init_network(network_config(config, ds.dim(), m.superclass_count()), s);
            TrainResult r = train(init, ds, LabelSpec::super(), tc);
            save_network(r.net, p.model("super"));
            save_loss(p, "super", r.loss_history);
            const Network base = qat ? quantize_network(r.net, fit_grids(r.net, config.qat_bits)) : r.net;
            save_network(base, p.model("base"));
            return r;
        }
        case TrainTarget::Kind::Lowerbound: {
            const std::uint64_t s = stage_seed(config.seed, Stage::Lowerbound);
            TrainConfig tc = config.lowerbound_train;
            tc.seed = s;
            const Network init = init_network(network_config(config, ds.dim(), m.subclass_count()), s);
            TrainResult r = train(init, ds, LabelSpec::all_subclasses(), tc);
            save_network(r.net, p.model("lowerbound"));
            save_loss(p, "lowerbound", r.loss_history);
            return r;
        }
        case TrainTarget::Kind::Sub: {
            const std::size_t i = target.index;
            check_superclass(ds, i);
            const std::uint64_t s = stage_seed(config.seed, Stage::Scratch, i);
            TrainConfig tc = config.sub_train;
            tc.seed = s;
            const Network init = init_network(network_config(config, ds.dim(), m.subclass_count(i)), s);
            TrainResult r = train(init, ds, LabelSpec::subclass_of(i), tc);
            const std::string name = "sub_" + std::to_string(i);
            save_network(r.net, p.model(name));
            save_loss(p, name, r.loss_history);
            return r;
        }
    }
    throw ParameterError("unknown train target");
}

TrainResult cmd_finetune(const ExperimentConfig& config, std::size_t superclass) {
    const RunPaths p{config.out};
    const Dataset ds = load_train(p);
    check_superclass(ds, superclass);
    const Network master = load_model(p, "super");
    TrainConfig tc = config.finetune_train;
    tc.seed = stage_seed(config.seed, Stage::Finetune, superclass);
    const std::string name = "ft_" + std::to_string(superclass);

    TrainResult r;
    if (config.delta_mode == DeltaMode::QatInt) {
        tc.qat = true;
        tc.qat_bits = config.qat_bits;
        const NetworkGrids grids = fit_grids(master, config.qat_bits);
        r = finetune_from_super(master, superclass, ds, tc, &grids);
        r.net = quantize_network(r.net, shared_body_grids(grids, r.net));
    } else {
        r = finetune_from_super(master, superclass, ds, tc);
    }
    save_network(r.net, p.model(name));
    save_loss(p, name, r.loss_history);
    return r;
}

PackSummary cmd_pack(const ExperimentConfig& config, std::size_t superclass) {
    const RunPaths p{config.out};
    const Network base = load_model(p, "base");
    if (superclass >= base.head_dim()) {
        throw ParameterError(fmt::format("superclass {} out of range: the router has {}", superclass, base.head_dim()));
    }
    const Network ft = load_model(p, "ft_" + std::to_string(superclass));
    const auto id = static_cast<std::uint32_t>(superclass);
    DeltaPack delta;
    if (config.delta_mode == DeltaMode::QatInt) {
        const NetworkGrids grids = fit_grids(load_model(p, "super"), config.qat_bits);
        delta = compute_delta(base, ft, DeltaMode::QatInt, grids, id);
    } else {
        delta = compute_delta(base, ft, DeltaMode::Fp16, id);
    }
    const PackedDelta packed = pack(delta);
    write_file(p.delta(superclass), packed.bytes);
    const std::size_t reference = reference_model_bytes(ft, config.delta_mode);
    return {superclass, config.delta_mode, packed.raw_size, packed.packed_size, reference,
            compression_ratio(packed, reference)};
}

Network cmd_unpack(const ExperimentConfig& config, std::size_t superclass) {
    const RunPaths p{config.out};
    const Network base = load_model(p, "base");
    require(p.delta(superclass), "delta (run pack first)");
    const DeltaPack delta = unpack(read_file(p.delta(superclass)));
    if (delta.superclass_id != superclass) {
        throw ContractError(fmt::format("{} holds superclass {}", p.delta(superclass).string(), delta.superclass_id));
    }
    Network net = reconstruct(base, delta);
    save_network(net, p.model("reconstructed_" + std::to_string(superclass)));
    return net;
}

EvalReport cmd_eval(const ExperimentConfig& config, EvalMode mode) {
    const RunPaths p{config.out};
    const Dataset test = load_test(p);
    const std::size_t n_super = test.manifest.superclass_count();

    EvalReport report;
    switch (mode) {
        case EvalMode::Lowerbound: {
            const Network lb = load_model(p, "lowerbound");
            report = evaluate(mode, EvalModels{&lb, nullptr, nullptr}, test);
            break;
        }
        case EvalMode::UpperboundOracle:
        case EvalMode::TwoStageVanilla: {
            std::vector<Network> specialists;
            for (std::size_t i = 0; i < n_super; ++i) specialists.push_back(load_model(p, specialist_name(config, i)));
            const ModelRegistry registry(load_model(p, "base"), std::move(specialists), test.manifest);
            report = evaluate(mode, EvalModels{nullptr, &registry, nullptr}, test);
            break;
        }
        case EvalMode::TwoStageEfficient: {
            std::vector<std::filesystem::path> paths;
            for (std::size_t i = 0; i < n_super; ++i) {
                require(p.delta(i), "delta (run pack first)");
                paths.push_back(p.delta(i));
            }
            EfficientSession session(std::make_shared<const Network>(load_model(p, "base")),
                                     std::make_shared<const FileDeltaStorage>(std::move(paths)), test.manifest,
                                     config.cache);
            report = evaluate(mode, EvalModels{nullptr, nullptr, &session}, test);
            write_text(p.eval(report.mode + "_ledger.csv"), render_ledger_csv(*report.ledger));
            break;
        }
    }
    write_text(p.eval(report.mode + ".csv"), render_eval_csv(report));
    write_text(p.eval(report.mode + "_confusion.csv"), render_confusion_csv(report.confusion, report.superclass_names));
    write_text(p.eval(report.mode + "_predictions.csv"), render_predictions_csv(report, test.sub_labels));
    return report;
}

Summary cmd_report(const std::filesystem::path& run_dir) {
    const RunPaths p{run_dir};
    const std::vector<EvalMode> modes{EvalMode::Lowerbound, EvalMode::TwoStageVanilla, EvalMode::TwoStageEfficient,
                                      EvalMode::UpperboundOracle};
    std::vector<std::string> missing;
    auto need = [&](const std::filesystem::path& f) {
        if (!std::filesystem::exists(f)) missing.push_back(std::filesystem::relative(f, run_dir).string());
    };
    need(p.test_data());
    for (auto m : modes) need(p.eval(std::string(eval_mode_name(m)) + ".csv"));
    std::size_t n_super = 0;
    if (missing.empty()) {
        n_super = load_dataset(p.test_data()).manifest.superclass_count();
        for (std::size_t i = 0; i < n_super; ++i) {
            need(p.delta(i));
            need(p.model("ft_" + std::to_string(i)));
        }
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += "\n  " + m;
        throw ContractError("incomplete run directory " + run_dir.string() + ", missing:" + list);
    }

    Summary s;
    std::vector<GapEntry> entries;
    for (auto m : modes) entries.push_back(read_gap_entry(p.eval(std::string(eval_mode_name(m)) + ".csv"), eval_mode_name(m)));
    s.gap = gap_report(entries);

    const HierarchyManifest manifest = load_dataset(p.test_data()).manifest;
    for (std::size_t i = 0; i < n_super; ++i) {
        const Bytes bytes = read_file(p.delta(i));
        const DeltaPack delta = unpack(bytes);
        const PackedDelta repacked = pack(delta);
        const Network ft = load_network(p.model("ft_" + std::to_string(i)));
        const std::size_t reference = reference_model_bytes(ft, delta.mode);
        const PackedDelta on_disk{bytes, repacked.raw_size, bytes.size()};
        s.compression.push_back({manifest.superclass_name(i), mode_name(delta.mode), repacked.raw_size, bytes.size(),
                                 reference, compression_ratio(on_disk, reference)});
    }
    s.text = s.gap.text + "\n" + render_compression_text(s.compression);
    s.csv = s.gap.csv;
    write_text(p.report("summary.txt"), s.text);
    write_text(p.report("summary.csv"), s.csv);
    write_text(p.report("compression.csv"), render_compression_csv(s.compression));
    return s;
}

Summary run_pipeline(const ExperimentConfig& config) {
    cmd_gen_data(config);
    const std::size_t n_super = load_dataset(RunPaths{config.out}.test_data()).manifest.superclass_count();
    cmd_train(config, {TrainTarget::Kind::Super, 0});
    cmd_train(config, {TrainTarget::Kind::Lowerbound, 0});
    for (std::size_t i = 0; i < n_super; ++i) {
        if (config.specialists == SpecialistSource::Scratch) cmd_train(config, {TrainTarget::Kind::Sub, i});
        cmd_finetune(config, i);
        cmd_pack(config, i);
        cmd_unpack(config, i);
    }
    for (auto m : {EvalMode::Lowerbound, EvalMode::UpperboundOracle, EvalMode::TwoStageVanilla,
                   EvalMode::TwoStageEfficient}) {
        cmd_eval(config, m);
    }
    return cmd_report(config.out);
}

}  // namespace supersub
