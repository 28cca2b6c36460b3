#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fuselab/datakit.hpp"

namespace fuselab {

struct ClassCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// One-vs-rest counts per class.
struct ConfusionCounts {
    std::vector<std::string> classes;
    std::vector<ClassCounts> per_class;
    std::size_t total = 0;
    std::size_t correct = 0;
};

// InputError on a length mismatch, an empty input or an out-of-range label.
ConfusionCounts confusion(std::span<const std::size_t> truths, std::span<const std::size_t> preds,
                          const LabelSpace& space);
ConfusionCounts confusion(const std::vector<std::string>& truths, const std::vector<std::string>& preds,
                          const LabelSpace& space);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    // (TP + TN) / total for this class alone
    double accuracy = 0.0;
    std::size_t support = 0;
};

/// Zero denominators give 0 for P and R, and F is 0 when P + R = 0. Macro
/// values are unweighted means over all classes. accuracy is the overall
/// fraction of correct predictions.
struct MetricsReport {
    std::vector<std::string> classes;
    std::vector<ClassMetrics> per_class;
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    std::size_t total = 0;

    // Largest class above 80% of the samples; accuracy says little then.
    bool skewed() const;
};

MetricsReport compute_metrics(const ConfusionCounts& counts);

struct TableRow {
    std::string model;
    std::string inputs;
    std::string fusion;
    MetricsReport metrics;
};

// Model | Input modes | Fusion type | P | R | F | A, macro values in percent.
std::string format_table(const std::vector<TableRow>& rows);
std::string format_csv(const std::vector<TableRow>& rows);
// Per-class breakdown with supports.
std::string format_report(const MetricsReport& report);

}  // namespace fuselab
