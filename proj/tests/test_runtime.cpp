#include <gtest/gtest.h>

#include <memory>

#include "helpers.hpp"
#include "supersub/error.hpp"
#include "supersub/quant.hpp"
#include "supersub/report.hpp"
#include "supersub/runtime.hpp"

using namespace supersub;
using namespace testing_helpers;

namespace {

HierarchyManifest manifest3() {
    return HierarchyManifest({{"A", {"a0", "a1"}}, {"B", {"b0", "b1", "b2"}}, {"C", {"c0", "c1"}}});
}

struct Fixture {
    HierarchyManifest manifest = manifest3();
    Network base;
    std::vector<Network> specialists;
    std::vector<PackedDelta> packs;
};

// Router and specialists quantized on shared grids so qat-int deltas are exact.
Fixture make_fixture(std::uint64_t seed, std::size_t input = 4) {
    Prng rng(seed);
    Fixture f;
    const Network master = random_network(rng, {{input, 6, 6, 3}, {true, true}});
    const NetworkGrids grids = fit_grids(master, 8);
    f.base = quantize_network(master, grids);
    for (std::size_t i = 0; i < 3; ++i) {
        const Network sub = perturbed(master, rng, f.manifest.subclass_count(i), 0.05);
        f.specialists.push_back(quantize_network(sub, shared_body_grids(grids, sub)));
        f.packs.push_back(pack(compute_delta(f.base, f.specialists.back(), DeltaMode::QatInt, grids,
                                             static_cast<std::uint32_t>(i))));
    }
    return f;
}

std::vector<std::vector<float>> random_rows(Prng& rng, std::size_t n, std::size_t dim) {
    std::vector<std::vector<float>> rows(n, std::vector<float>(dim));
    for (auto& r : rows) {
        for (float& v : r) v = static_cast<float>(rng.gaussian(0, 2));
    }
    return rows;
}

EfficientSession make_session(const Fixture& f, bool cache = true) {
    return EfficientSession(std::make_shared<const Network>(f.base),
                            std::make_shared<const MemoryDeltaStorage>(f.packs), f.manifest, cache);
}

Dataset dataset_from(const std::vector<std::vector<float>>& rows, std::vector<std::size_t> labels,
                     const HierarchyManifest& m) {
    std::vector<float> flat;
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    return Dataset{Tensor({rows.size(), rows.empty() ? 0 : rows[0].size()}, flat), std::move(labels), m};
}

}  // namespace

TEST(Registry, ConstructionContracts) {
    const Fixture f = make_fixture(1);
    auto specs = f.specialists;
    specs.pop_back();
    EXPECT_THROW(ModelRegistry(f.base, specs, f.manifest), ContractError);
    specs = f.specialists;
    std::swap(specs[0], specs[1]);
    EXPECT_THROW(ModelRegistry(f.base, specs, f.manifest), ContractError);
    EXPECT_NO_THROW(ModelRegistry(f.base, f.specialists, f.manifest));
}

TEST(Registry, RoutingContainment) {
    const Fixture f = make_fixture(2);
    const ModelRegistry reg(f.base, f.specialists, f.manifest);
    Prng rng(3);
    for (const auto& row : random_rows(rng, 500, 4)) {
        const Prediction p = reg.infer(row);
        EXPECT_EQ(f.manifest.super_of(p.subclass), p.superclass);
    }
    const std::vector<float> wrong(5, 0.0f);
    EXPECT_THROW(reg.infer(wrong), DimensionError);
}

TEST(Efficient, QatIntMatchesVanillaBitForBit) {
    const Fixture f = make_fixture(4);
    const ModelRegistry reg(f.base, f.specialists, f.manifest);
    EfficientSession session = make_session(f);
    Prng rng(5);
    for (const auto& row : random_rows(rng, 1000, 4)) EXPECT_EQ(session.infer(row).prediction, reg.infer(row));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE(reconstruct(f.base, unpack(f.packs[i].bytes)).bit_equal(f.specialists[i]));
}

TEST(Efficient, CacheChargesNothingOnRepeat) {
    const Fixture f = make_fixture(6);
    EfficientSession session = make_session(f);
    Prng rng(7);
    const auto rows = random_rows(rng, 1, 4);
    const auto first = session.infer(rows[0]);
    EXPECT_EQ(first.charged.bytes_loaded, f.packs[first.prediction.superclass].packed_size);
    EXPECT_EQ(first.charged.specialist_switches, 1u);
    const auto second = session.infer(rows[0]);
    EXPECT_EQ(second.charged.bytes_loaded, 0u);
    EXPECT_EQ(second.charged.reconstruction_adds, 0u);
    EXPECT_EQ(second.charged.specialist_switches, 0u);
}

TEST(Efficient, LedgerArithmeticOverTrace) {
    const Fixture f = make_fixture(8);
    const ModelRegistry reg(f.base, f.specialists, f.manifest);
    Prng rng(9);
    const auto trace = random_rows(rng, 300, 4);

    EfficientSession session = make_session(f);
    std::uint64_t expected_bytes = 0, expected_adds = 0, switches = 0;
    std::optional<std::size_t> last;
    CostLedger prev;
    for (const auto& row : trace) {
        const std::size_t s = reg.infer(row).superclass;
        if (last != s) {
            expected_bytes += f.packs[s].packed_size;
            expected_adds += unpack(f.packs[s].bytes).add_elements();
            ++switches;
        }
        last = s;
        session.infer(row);
        const CostLedger& now = session.ledger();
        EXPECT_GE(now.bytes_loaded, prev.bytes_loaded);
        EXPECT_GE(now.peak_resident_bytes, prev.peak_resident_bytes);
        EXPECT_GE(now.reconstruction_adds, prev.reconstruction_adds);
        EXPECT_GE(now.specialist_switches, prev.specialist_switches);
        prev = now;
    }
    EXPECT_EQ(session.ledger().bytes_loaded, expected_bytes);
    EXPECT_EQ(session.ledger().reconstruction_adds, expected_adds);
    EXPECT_EQ(session.ledger().specialist_switches, switches);

    // Replaying the trace in a session whose cache ends on the trace's first superclass
    // doubles every counter exactly.
    EfficientSession twice = make_session(f, true);
    for (int rep = 0; rep < 2; ++rep) {
        for (const auto& row : trace) twice.infer(row);
        if (rep == 0) {
            EXPECT_EQ(twice.ledger().bytes_loaded, expected_bytes);
        }
    }
    const std::size_t first = reg.infer(trace.front()).superclass;
    const std::size_t final_super = reg.infer(trace.back()).superclass;
    const std::uint64_t boundary = first == final_super ? f.packs[first].packed_size : 0;
    EXPECT_EQ(twice.ledger().bytes_loaded, 2 * expected_bytes - boundary);

    EfficientSession no_cache = make_session(f, false);
    for (int rep = 0; rep < 2; ++rep) {
        for (const auto& row : trace) no_cache.infer(row);
    }
    std::uint64_t all = 0;
    for (const auto& row : trace) all += f.packs[reg.infer(row).superclass].packed_size;
    EXPECT_EQ(no_cache.ledger().bytes_loaded, 2 * all);
}

TEST(Efficient, PeakResidencyBounds) {
    const Fixture f = make_fixture(10, 64);
    const ModelRegistry reg(f.base, f.specialists, f.manifest);
    EfficientSession session = make_session(f);
    Prng rng(11);
    for (const auto& row : random_rows(rng, 300, 64)) session.infer(row);
    std::size_t max_spec = 0, max_pack = 0;
    for (const auto& s : f.specialists) max_spec = std::max(max_spec, network_file_bytes(s));
    for (const auto& p : f.packs) max_pack = std::max(max_pack, p.packed_size);
    EXPECT_LE(session.ledger().peak_resident_bytes, network_file_bytes(f.base) + max_spec + max_pack);
    EXPECT_LT(session.ledger().peak_resident_bytes, reg.total_model_bytes());
}

TEST(Efficient, StaleDeltaDetected) {
    Fixture f = make_fixture(12);
    f.base.layers()[0].weight[0] = -f.base.layers()[0].weight[0] + 0.5f;
    EfficientSession session = make_session(f);
    const std::vector<float> row(4, 0.5f);
    EXPECT_THROW(session.infer(row), BaseMismatchError);
}

TEST(Efficient, StorageMustCoverEverySuperclass) {
    Fixture f = make_fixture(13);
    f.packs.pop_back();
    EXPECT_THROW(make_session(f), ContractError);
}

TEST(Confusion, DiagonalAndConservation) {
    const std::vector<std::size_t> truth{0, 0, 1, 2, 2, 2};
    const auto diag = confusion_matrix(truth, truth, 3);
    EXPECT_EQ(diag, (ConfusionMatrix{{2, 0, 0}, {0, 1, 0}, {0, 0, 3}}));
    const std::vector<std::size_t> pred{0, 1, 1, 2, 0, 2};
    const auto m = confusion_matrix(pred, truth, 3);
    EXPECT_EQ(m[0][1], 1u);
    EXPECT_EQ(m[2][0], 1u);
    const std::size_t expected_rows[] = {2, 1, 3};
    for (std::size_t i = 0; i < 3; ++i) {
        std::size_t row = 0;
        for (auto c : m[i]) row += c;
        EXPECT_EQ(row, expected_rows[i]);
    }
}

TEST(Confusion, Errors) {
    const std::vector<std::size_t> a{0, 3}, b{0, 1}, c{0};
    EXPECT_THROW(confusion_matrix(a, b, 3), IndexError);
    EXPECT_THROW(confusion_matrix(c, b, 3), ContractError);
}

TEST(Confusion, PublishedBirdRowPercent) {
    // Bird row of 10000 test images: 9677 kept, 8 to Car, the rest to Dog.
    const ConfusionMatrix counts{{9677, 8, 315}, {1, 98, 1}, {2, 0, 98}};
    const std::string pct = render_confusion_percent(counts, {"Bird", "Car", "Dog"});
    EXPECT_EQ(pct, "true\\pred,Bird,Car,Dog\nBird,96.77,0.08,3.15\nCar,1.00,98.00,1.00\nDog,2.00,0.00,98.00\n");
    EXPECT_EQ(render_confusion_csv(counts, {"Bird", "Car", "Dog"}),
              "true\\pred,Bird,Car,Dog\nBird,9677,8,315\nCar,1,98,1\nDog,2,0,98\n");
}

TEST(Evaluate, PerfectPredictionsGiveDiagonal) {
    const HierarchyManifest m = manifest3();
    Prng rng(14);
    const std::vector<std::size_t> labels{0, 1, 2, 3, 4, 5, 6, 6, 2};
    const Dataset ds = dataset_from(random_rows(rng, labels.size(), 2), labels, m);
    std::vector<Prediction> preds;
    for (auto y : labels) preds.push_back({m.super_of(y), y});
    const EvalReport r = summarize("two_stage_vanilla", ds, preds);
    EXPECT_EQ(r.average_accuracy, 100.0);
    EXPECT_EQ(r.micro_accuracy, 100.0);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            if (i != j) {
                EXPECT_EQ(r.confusion[i][j], 0u);
            }
        }
        std::size_t row = 0;
        for (auto c : r.confusion[i]) row += c;
        EXPECT_EQ(row, r.per_super_count[i]);
    }
}

TEST(Evaluate, MacroIsMeanOfSuperclassAccuracies) {
    const HierarchyManifest m = manifest3();
    Prng rng(15);
    const std::vector<std::size_t> labels{0, 0, 0, 0, 2, 3, 5, 6};
    const Dataset ds = dataset_from(random_rows(rng, labels.size(), 2), labels, m);
    std::vector<Prediction> preds{{0, 0}, {0, 1}, {0, 1}, {0, 1}, {1, 2}, {1, 3}, {2, 6}, {2, 6}};
    const EvalReport r = summarize("x", ds, preds);
    EXPECT_DOUBLE_EQ(r.per_super_accuracy[0], 25.0);
    EXPECT_DOUBLE_EQ(r.per_super_accuracy[1], 100.0);
    EXPECT_DOUBLE_EQ(r.per_super_accuracy[2], 50.0);
    EXPECT_DOUBLE_EQ(r.average_accuracy, 175.0 / 3);
    EXPECT_DOUBLE_EQ(r.micro_accuracy, 50.0);
    std::vector<Prediction> escaping = preds;
    escaping[0] = {1, 0};
    EXPECT_THROW(summarize("x", ds, escaping), ContractError);
}

TEST(Evaluate, ModesNeedTheirModels) {
    const Fixture f = make_fixture(16);
    Prng rng(17);
    const Dataset ds = dataset_from(random_rows(rng, 10, 4), std::vector<std::size_t>(10, 3), f.manifest);
    EXPECT_THROW(evaluate(EvalMode::Lowerbound, {}, ds), ContractError);
    EXPECT_THROW(evaluate(EvalMode::TwoStageVanilla, {}, ds), ContractError);
    EXPECT_THROW(evaluate(EvalMode::TwoStageEfficient, {}, ds), ContractError);
    const Network wrong_lb = init_network({{4, 5, 3}, {false}}, 1);
    EXPECT_THROW(evaluate(EvalMode::Lowerbound, {&wrong_lb, nullptr, nullptr}, ds), ContractError);
}

TEST(Evaluate, OracleUsesTrueSuperclassAndEfficientCarriesLedger) {
    const Fixture f = make_fixture(18);
    const ModelRegistry reg(f.base, f.specialists, f.manifest);
    Prng rng(19);
    std::vector<std::size_t> labels;
    for (int i = 0; i < 60; ++i) labels.push_back(rng.below(7));
    const Dataset ds = dataset_from(random_rows(rng, 60, 4), labels, f.manifest);
    const EvalReport up = evaluate(EvalMode::UpperboundOracle, {nullptr, &reg, nullptr}, ds);
    EXPECT_EQ(up.stage1_accuracy, 100.0);
    const EvalReport van = evaluate(EvalMode::TwoStageVanilla, {nullptr, &reg, nullptr}, ds);
    EfficientSession session = make_session(f);
    const EvalReport eff = evaluate(EvalMode::TwoStageEfficient, {nullptr, nullptr, &session}, ds);
    EXPECT_EQ(eff.predictions, van.predictions);
    ASSERT_TRUE(eff.ledger.has_value());
    EXPECT_EQ(*eff.ledger, session.ledger());
    EXPECT_FALSE(van.ledger.has_value());
}

TEST(EvalMode, Names) {
    for (auto m : {EvalMode::Lowerbound, EvalMode::UpperboundOracle, EvalMode::TwoStageVanilla,
                   EvalMode::TwoStageEfficient}) {
        EXPECT_EQ(parse_eval_mode(eval_mode_name(m)), m);
    }
    EXPECT_THROW(parse_eval_mode("oracle"), ParameterError);
}

TEST(Report, EvalAndLedgerCsv) {
    EvalReport r;
    r.mode = "lowerbound";
    r.superclass_names = {"A", "B"};
    r.per_super_accuracy = {50.0, 100.0};
    r.per_super_count = {2, 4};
    r.average_accuracy = 75.0;
    r.micro_accuracy = 500.0 / 6;
    r.stage1_accuracy = 100.0;
    r.n_test = 6;
    EXPECT_EQ(render_eval_csv(r),
              "mode,superclass,accuracy_pct,n_test\n"
              "lowerbound,A,50.0000,2\n"
              "lowerbound,B,100.0000,4\n"
              "lowerbound,macro_average,75.0000,6\n"
              "lowerbound,micro_average,83.3333,6\n"
              "lowerbound,stage1_superclass,100.0000,6\n");
    EXPECT_EQ(render_ledger_csv({100, 2000, 30, 4}),
              "bytes_loaded,peak_resident_bytes,reconstruction_adds,specialist_switches\n100,2000,30,4\n");
}

TEST(GapReport, PublishedTwoStageImprovement) {
    const GapReport g = gap_report(std::vector<GapEntry>{{"lowerbound", 71.18, 100}, {"two_stage", 74.48, 100}});
    EXPECT_NE(g.text.find("two_stage - lowerbound = +3.30"), std::string::npos) << g.text;
}

TEST(GapReport, PublishedUpperboundGapAbsoluteAndRelative) {
    const GapReport g =
        gap_report(std::vector<GapEntry>{{"lowerbound", 71.18, 100}, {"upperbound_oracle", 75.07, 100}});
    EXPECT_NE(g.text.find("upperbound_oracle - lowerbound = +3.89 (+5.47% relative)"), std::string::npos) << g.text;
    EXPECT_EQ(g.csv,
              "mode,accuracy_pct,delta_vs_lowerbound,relative_vs_lowerbound_pct,delta_vs_upperbound,n_test\n"
              "lowerbound,71.18,,,-3.89,100\n"
              "upperbound_oracle,75.07,+3.89,+5.47,,100\n");
}

TEST(GapReport, SingleRowAndContracts) {
    const GapReport g = gap_report(std::vector<GapEntry>{{"two_stage_vanilla", 80.0, 10}});
    EXPECT_EQ(g.csv,
              "mode,accuracy_pct,delta_vs_lowerbound,relative_vs_lowerbound_pct,delta_vs_upperbound,n_test\n"
              "two_stage_vanilla,80.00,,,,10\n");
    EXPECT_EQ(g.text.find(" = "), std::string::npos);
    EXPECT_THROW(gap_report(std::vector<GapEntry>{{"lowerbound", 70, 10}, {"upperbound_oracle", 75, 11}}),
                 ContractError);
    EXPECT_THROW(gap_report(std::vector<GapEntry>{}), ContractError);
}

TEST(CompressionSummary, PublishedRatiosAndAverage) {
    const std::vector<CompressionRow> rows{{"Bird", "fp16", 0, 44, 100, 0.44},  {"Dog", "fp16", 0, 40, 100, 0.40},
                                           {"Bird", "qat-int", 0, 20, 100, 0.20}, {"Dog", "qat-int", 0, 22, 100, 0.22}};
    const std::string csv = render_compression_csv(rows);
    EXPECT_NE(csv.find("Bird,fp16,0,44,100,0.4400\n"), std::string::npos);
    EXPECT_NE(csv.find("average,fp16,,,,0.4200\n"), std::string::npos);
    EXPECT_NE(csv.find("average,qat-int,,,,0.2100\n"), std::string::npos);
    EXPECT_DOUBLE_EQ(average_ratio(rows, "qat-int"), 0.21);
    EXPECT_EQ(average_ratio(rows, "none"), 0.0);
}
