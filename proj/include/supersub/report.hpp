#pragma once

#include <string>
#include <vector>

#include "supersub/runtime.hpp"

namespace supersub {

// Per-superclass rows under `mode,superclass,accuracy_pct,n_test`, then macro_average,
// micro_average and stage1_superclass summary rows.
std::string render_eval_csv(const EvalReport& report);

// `true\pred` header followed by one row of counts per true superclass.
std::string render_confusion_csv(const ConfusionMatrix& counts, const std::vector<std::string>& names);
// Same grid, each row normalized to percent of its row sum, two decimals. Empty rows print 0.00.
std::string render_confusion_percent(const ConfusionMatrix& counts, const std::vector<std::string>& names);

std::string render_ledger_csv(const CostLedger& ledger);

// `index,true_subclass,pred_superclass,pred_subclass`.
std::string render_predictions_csv(const EvalReport& report, const std::vector<std::size_t>& true_subclasses);

struct GapEntry {
    std::string mode;
    double accuracy = 0.0;  // macro average, percent
    std::size_t n_test = 0;
};

struct GapReport {
    std::string text;
    std::string csv;
};

// Rows keep input order. Deltas are taken against entries named "lowerbound" and
// "upperbound_oracle" when present and left blank otherwise.
GapReport gap_report(const std::vector<GapEntry>& entries);
GapReport gap_report(const std::vector<EvalReport>& reports);

struct CompressionRow {
    std::string superclass;
    std::string mode;  // delta mode name
    std::size_t raw_bytes = 0;
    std::size_t packed_bytes = 0;
    std::size_t reference_bytes = 0;
    double ratio = 0.0;
};

// Per-superclass rows plus one `average` row per delta mode (mean of that mode's ratios).
std::string render_compression_csv(const std::vector<CompressionRow>& rows);
std::string render_compression_text(const std::vector<CompressionRow>& rows);

// Ratio mean for one delta mode; 0 when the mode has no rows.
double average_ratio(const std::vector<CompressionRow>& rows, const std::string& mode);

}  // namespace supersub
