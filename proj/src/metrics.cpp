#include "fuselab/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "fuselab/errors.hpp"

namespace fuselab {

ConfusionCounts confusion(std::span<const std::size_t> truths, std::span<const std::size_t> preds,
                          const LabelSpace& space) {
    if (truths.size() != preds.size())
        throw InputError("confusion: " + std::to_string(truths.size()) + " truths vs " + std::to_string(preds.size()) +
                         " predictions");
    if (truths.empty()) throw InputError("confusion: no samples");
    const std::size_t c = space.size();
    ConfusionCounts out;
    out.classes = space.names();
    out.per_class.assign(c, {});
    out.total = truths.size();
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (truths[i] >= c || preds[i] >= c) throw InputError("confusion: label outside the label space");
        if (truths[i] == preds[i]) {
            ++out.per_class[truths[i]].tp;
            ++out.correct;
        } else {
            ++out.per_class[truths[i]].fn;
            ++out.per_class[preds[i]].fp;
        }
    }
    for (auto& k : out.per_class) k.tn = out.total - k.tp - k.fp - k.fn;
    return out;
}

ConfusionCounts confusion(const std::vector<std::string>& truths, const std::vector<std::string>& preds,
                          const LabelSpace& space) {
    auto ids = [&space](const std::vector<std::string>& names) {
        std::vector<std::size_t> out;
        out.reserve(names.size());
        for (const auto& n : names) {
            auto i = space.find(n);
            if (!i) throw InputError("confusion: unknown label '" + n + "'");
            out.push_back(*i);
        }
        return out;
    };
    const auto t = ids(truths);
    const auto p = ids(preds);
    return confusion(t, p, space);
}

namespace {

double ratio(std::size_t num, std::size_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }

}  // namespace

bool MetricsReport::skewed() const {
    std::size_t largest = 0;
    for (const auto& m : per_class) largest = std::max(largest, m.support);
    return total > 0 && static_cast<double>(largest) > 0.8 * static_cast<double>(total);
}

MetricsReport compute_metrics(const ConfusionCounts& counts) {
    MetricsReport r;
    r.classes = counts.classes;
    r.total = counts.total;
    r.accuracy = ratio(counts.correct, counts.total);
    for (const auto& k : counts.per_class) {
        ClassMetrics m;
        m.precision = ratio(k.tp, k.tp + k.fp);
        m.recall = ratio(k.tp, k.tp + k.fn);
        m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
        m.accuracy = ratio(k.tp + k.tn, counts.total);
        m.support = k.tp + k.fn;
        r.per_class.push_back(m);
    }
    const double n = static_cast<double>(r.per_class.size());
    for (const auto& m : r.per_class) {
        r.macro_precision += m.precision / n;
        r.macro_recall += m.recall / n;
        r.macro_f1 += m.f1 / n;
    }
    return r;
}

std::string format_table(const std::vector<TableRow>& rows) {
    std::size_t w_model = 5, w_inputs = 11, w_fusion = 11;
    for (const auto& row : rows) {
        w_model = std::max(w_model, row.model.size());
        w_inputs = std::max(w_inputs, row.inputs.size());
        w_fusion = std::max(w_fusion, row.fusion.size());
    }
    std::ostringstream out;
    auto cell = [&out](const std::string& s, std::size_t w) { out << std::left << std::setw(static_cast<int>(w)) << s << " | "; };
    cell("Model", w_model);
    cell("Input modes", w_inputs);
    cell("Fusion type", w_fusion);
    out << std::right << std::setw(6) << "P" << " | " << std::setw(6) << "R" << " | " << std::setw(6) << "F" << " | "
        << std::setw(6) << "A" << '\n';
    out << std::string(w_model + w_inputs + w_fusion + 9 + 4 * 6 + 9, '-') << '\n';
    out << std::fixed << std::setprecision(2);
    bool any_skewed = false;
    for (const auto& row : rows) {
        cell(row.model, w_model);
        cell(row.inputs, w_inputs);
        cell(row.fusion, w_fusion);
        const auto& m = row.metrics;
        out << std::right << std::setw(6) << 100.0 * m.macro_precision << " | " << std::setw(6) << 100.0 * m.macro_recall
            << " | " << std::setw(6) << 100.0 * m.macro_f1 << " | " << std::setw(6) << 100.0 * m.accuracy;
        if (m.skewed()) {
            out << " *";
            any_skewed = true;
        }
        out << '\n';
    }
    if (any_skewed) out << "* largest class holds over 80% of the samples; accuracy is not informative\n";
    return out.str();
}

std::string format_csv(const std::vector<TableRow>& rows) {
    std::ostringstream out;
    out << "model,inputs,fusion,precision,recall,f1,accuracy,samples\n" << std::setprecision(17);
    for (const auto& row : rows) {
        const auto& m = row.metrics;
        out << row.model << ',' << row.inputs << ',' << row.fusion << ',' << m.macro_precision << ',' << m.macro_recall
            << ',' << m.macro_f1 << ',' << m.accuracy << ',' << m.total << '\n';
    }
    return out.str();
}

std::string format_report(const MetricsReport& report) {
    std::size_t w = 5;
    for (const auto& c : report.classes) w = std::max(w, c.size());
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(w)) << "Class" << std::right << std::setw(10) << "Precision"
        << std::setw(10) << "Recall" << std::setw(10) << "F1" << std::setw(10) << "Support" << '\n';
    out << std::fixed << std::setprecision(4);
    for (std::size_t i = 0; i < report.classes.size(); ++i) {
        const auto& m = report.per_class[i];
        out << std::left << std::setw(static_cast<int>(w)) << report.classes[i] << std::right << std::setw(10)
            << m.precision << std::setw(10) << m.recall << std::setw(10) << m.f1 << std::setw(10) << m.support << '\n';
    }
    out << std::left << std::setw(static_cast<int>(w)) << "macro" << std::right << std::setw(10) << report.macro_precision
        << std::setw(10) << report.macro_recall << std::setw(10) << report.macro_f1 << std::setw(10) << report.total
        << '\n';
    out << "accuracy " << report.accuracy;
    if (report.skewed()) out << " (largest class over 80% of samples; not informative)";
    out << '\n';
    return out.str();
}

}  // namespace fuselab
