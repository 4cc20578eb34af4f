#include "supersub/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <iterator>
#include <optional>

#include "supersub/error.hpp"

namespace supersub {

namespace {

std::string confusion_header(const std::vector<std::string>& names) {
    std::string out = "true\\pred";
    for (const auto& n : names) out += "," + n;
    return out + "\n";
}

void check_square(const ConfusionMatrix& counts, const std::vector<std::string>& names) {
    if (counts.size() != names.size()) throw ContractError("confusion matrix rows do not match the name list");
    for (const auto& row : counts) {
        if (row.size() != names.size()) throw ContractError("confusion matrix is not square");
    }
}

std::optional<double> find_accuracy(const std::vector<GapEntry>& entries, const std::string& mode) {
    for (const auto& e : entries) {
        if (e.mode == mode) return e.accuracy;
    }
    return std::nullopt;
}

std::vector<std::string> mode_order(const std::vector<CompressionRow>& rows) {
    std::vector<std::string> modes;
    for (const auto& r : rows) {
        if (std::find(modes.begin(), modes.end(), r.mode) == modes.end()) modes.push_back(r.mode);
    }
    return modes;
}

}  // namespace

std::string render_eval_csv(const EvalReport& r) {
    fmt::memory_buffer out;
    fmt::format_to(std::back_inserter(out), "mode,superclass,accuracy_pct,n_test\n");
    for (std::size_t s = 0; s < r.superclass_names.size(); ++s) {
        fmt::format_to(std::back_inserter(out), "{},{},{:.4f},{}\n", r.mode, r.superclass_names[s],
                       r.per_super_accuracy[s], r.per_super_count[s]);
    }
    fmt::format_to(std::back_inserter(out), "{},macro_average,{:.4f},{}\n", r.mode, r.average_accuracy, r.n_test);
    fmt::format_to(std::back_inserter(out), "{},micro_average,{:.4f},{}\n", r.mode, r.micro_accuracy, r.n_test);
    fmt::format_to(std::back_inserter(out), "{},stage1_superclass,{:.4f},{}\n", r.mode, r.stage1_accuracy, r.n_test);
    return fmt::to_string(out);
}

std::string render_confusion_csv(const ConfusionMatrix& counts, const std::vector<std::string>& names) {
    check_square(counts, names);
    std::string out = confusion_header(names);
    for (std::size_t i = 0; i < counts.size(); ++i) {
        out += names[i];
        for (auto c : counts[i]) out += fmt::format(",{}", c);
        out += "\n";
    }
    return out;
}

std::string render_confusion_percent(const ConfusionMatrix& counts, const std::vector<std::string>& names) {
    check_square(counts, names);
    std::string out = confusion_header(names);
    for (std::size_t i = 0; i < counts.size(); ++i) {
        std::size_t total = 0;
        for (auto c : counts[i]) total += c;
        out += names[i];
        for (auto c : counts[i]) {
            const double pct = total ? 100.0 * static_cast<double>(c) / static_cast<double>(total) : 0.0;
            out += fmt::format(",{:.2f}", pct);
        }
        out += "\n";
    }
    return out;
}

std::string render_ledger_csv(const CostLedger& l) {
    return fmt::format("bytes_loaded,peak_resident_bytes,reconstruction_adds,specialist_switches\n{},{},{},{}\n",
                       l.bytes_loaded, l.peak_resident_bytes, l.reconstruction_adds, l.specialist_switches);
}

std::string render_predictions_csv(const EvalReport& r, const std::vector<std::size_t>& true_subclasses) {
    if (true_subclasses.size() != r.predictions.size()) {
        throw ContractError("prediction rendering needs one true label per prediction");
    }
    fmt::memory_buffer out;
    fmt::format_to(std::back_inserter(out), "index,true_subclass,pred_superclass,pred_subclass\n");
    for (std::size_t k = 0; k < r.predictions.size(); ++k) {
        fmt::format_to(std::back_inserter(out), "{},{},{},{}\n", k, true_subclasses[k], r.predictions[k].superclass,
                       r.predictions[k].subclass);
    }
    return fmt::to_string(out);
}

GapReport gap_report(const std::vector<GapEntry>& entries) {
    if (entries.empty()) throw ContractError("gap_report needs at least one report");
    for (const auto& e : entries) {
        if (e.n_test != entries.front().n_test) {
            throw ContractError(fmt::format("gap_report: {} has n_test {} but {} has {}", e.mode, e.n_test,
                                            entries.front().mode, entries.front().n_test));
        }
    }
    const auto lower = find_accuracy(entries, "lowerbound");
    const auto upper = find_accuracy(entries, "upperbound_oracle");

    std::size_t width = 4;
    for (const auto& e : entries) width = std::max(width, e.mode.size());

    GapReport out;
    out.csv = "mode,accuracy_pct,delta_vs_lowerbound,relative_vs_lowerbound_pct,delta_vs_upperbound,n_test\n";
    out.text = fmt::format("{:<{}}  {:>8}  {:>10}  {:>10}  {:>10}\n", "mode", width, "accuracy", "vs lower",
                           "rel lower", "vs upper");
    std::string lines;
    for (const auto& e : entries) {
        std::string d_low, r_low, d_up;
        if (lower && e.mode != "lowerbound") {
            d_low = fmt::format("{:+.2f}", e.accuracy - *lower);
            r_low = fmt::format("{:+.2f}%", 100.0 * (e.accuracy - *lower) / *lower);
            lines += fmt::format("{} - lowerbound = {} ({} relative)\n", e.mode, d_low, r_low);
        }
        if (upper && e.mode != "upperbound_oracle") d_up = fmt::format("{:+.2f}", e.accuracy - *upper);
        out.csv += fmt::format("{},{:.2f},{},{},{},{}\n", e.mode, e.accuracy, d_low,
                               r_low.empty() ? r_low : r_low.substr(0, r_low.size() - 1), d_up, e.n_test);
        out.text += fmt::format("{:<{}}  {:>8.2f}  {:>10}  {:>10}  {:>10}\n", e.mode, width, e.accuracy, d_low, r_low,
                                d_up);
    }
    if (!lines.empty()) out.text += "\n" + lines;
    return out;
}

GapReport gap_report(const std::vector<EvalReport>& reports) {
    std::vector<GapEntry> entries;
    for (const auto& r : reports) entries.push_back({r.mode, r.average_accuracy, r.n_test});
    return gap_report(entries);
}

double average_ratio(const std::vector<CompressionRow>& rows, const std::string& mode) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows) {
        if (r.mode == mode) {
            sum += r.ratio;
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

std::string render_compression_csv(const std::vector<CompressionRow>& rows) {
    fmt::memory_buffer out;
    fmt::format_to(std::back_inserter(out), "superclass,mode,raw_bytes,packed_bytes,reference_bytes,ratio\n");
    for (const auto& r : rows) {
        fmt::format_to(std::back_inserter(out), "{},{},{},{},{},{:.4f}\n", r.superclass, r.mode, r.raw_bytes,
                       r.packed_bytes, r.reference_bytes, r.ratio);
    }
    for (const auto& mode : mode_order(rows)) {
        fmt::format_to(std::back_inserter(out), "average,{},,,,{:.4f}\n", mode, average_ratio(rows, mode));
    }
    return fmt::to_string(out);
}

std::string render_compression_text(const std::vector<CompressionRow>& rows) {
    std::string out;
    for (const auto& mode : mode_order(rows)) {
        out += fmt::format("compression ({}):\n", mode);
        for (const auto& r : rows) {
            if (r.mode == mode) out += fmt::format("  {:<12} {:>8} / {:>8} bytes  ratio {:.4f}\n", r.superclass,
                                                   r.packed_bytes, r.reference_bytes, r.ratio);
        }
        out += fmt::format("  {:<12} ratio {:.4f}\n", "average", average_ratio(rows, mode));
    }
    return out;
}

}  // namespace supersub
