#include <random>

#include "fuselab/errors.hpp"
#include "fuselab/metrics.hpp"
#include "support.hpp"

using namespace fuselab;

namespace {

const LabelSpace kHN({"H", "N"}, LabelMode::binary);

std::vector<std::string> hn(const char* s) {
    std::vector<std::string> out;
    for (; *s; ++s) out.emplace_back(1, *s);
    return out;
}

MetricsReport hand_example() {
    return compute_metrics(confusion(hn("HHHHNNNNNN"), hn("HHHNHNNNNN"), kHN));
}

LabelSpace space_of(std::size_t classes) {
    std::vector<std::string> names;
    for (std::size_t c = 0; c < classes; ++c) names.push_back("c" + std::to_string(c));
    return LabelSpace(names, classes == 2 ? LabelMode::binary : LabelMode::multi);
}

}  // namespace

TEST(Confusion, HandCount) {
    const ConfusionCounts c = confusion(hn("HHHHNNNNNN"), hn("HHHNHNNNNN"), kHN);
    EXPECT_EQ(c.per_class[0], (ClassCounts{3, 1, 1, 5}));
    EXPECT_EQ(c.per_class[1], (ClassCounts{5, 1, 1, 3}));
    EXPECT_EQ(c.total, 10u);
    EXPECT_EQ(c.correct, 8u);
}

TEST(Confusion, PerfectPredictor) {
    const std::vector<std::size_t> y{0, 2, 1, 1, 0, 2, 2};
    const ConfusionCounts c = confusion(y, y, space_of(3));
    for (const auto& k : c.per_class) {
        EXPECT_EQ(k.fp, 0u);
        EXPECT_EQ(k.fn, 0u);
    }
    const MetricsReport m = compute_metrics(c);
    for (const auto& k : m.per_class) {
        EXPECT_EQ(k.precision, 1.0);
        EXPECT_EQ(k.recall, 1.0);
        EXPECT_EQ(k.f1, 1.0);
        EXPECT_EQ(k.accuracy, 1.0);
    }
    EXPECT_EQ(m.macro_precision, 1.0);
    EXPECT_EQ(m.macro_recall, 1.0);
    EXPECT_EQ(m.macro_f1, 1.0);
    EXPECT_EQ(m.accuracy, 1.0);
}

TEST(Confusion, SingleCorrectSample) {
    const std::vector<std::size_t> y{1};
    const ConfusionCounts c = confusion(y, y, space_of(3));
    EXPECT_EQ(c.per_class[1], (ClassCounts{1, 0, 0, 0}));
    EXPECT_EQ(c.per_class[0], (ClassCounts{0, 0, 0, 1}));
    EXPECT_EQ(c.per_class[2], (ClassCounts{0, 0, 0, 1}));
}

TEST(Confusion, InputErrors) {
    const std::vector<std::size_t> a{0, 1}, b{0}, empty, bad{0, 5};
    EXPECT_THROW(confusion(a, b, kHN), InputError);
    EXPECT_THROW(confusion(empty, empty, kHN), InputError);
    EXPECT_THROW(confusion(a, bad, kHN), InputError);
    EXPECT_THROW(confusion(hn("HX"), hn("HH"), kHN), InputError);
}

TEST(Metrics, HandArithmetic) {
    const MetricsReport m = hand_example();
    EXPECT_NEAR(m.per_class[0].precision, 0.75, 1e-15);
    EXPECT_NEAR(m.per_class[0].recall, 0.75, 1e-15);
    EXPECT_NEAR(m.per_class[0].f1, 0.75, 1e-15);
    EXPECT_NEAR(m.per_class[1].precision, 5.0 / 6.0, 1e-15);
    EXPECT_NEAR(m.per_class[1].recall, 5.0 / 6.0, 1e-15);
    EXPECT_NEAR(m.per_class[1].f1, 5.0 / 6.0, 1e-15);
    EXPECT_NEAR(m.accuracy, 0.8, 1e-15);
    EXPECT_NEAR(m.macro_f1, 0.791667, 1e-6);
    EXPECT_EQ(m.per_class[0].support, 4u);
    EXPECT_EQ(m.per_class[1].support, 6u);
}

TEST(Metrics, MacroIsUnweightedMean) {
    // class a: P 1, R 2/3, F 0.8; class b: P 0.75, R 0.5, F 0.6
    ConfusionCounts c;
    c.classes = {"a", "b"};
    c.per_class = {ClassCounts{2, 0, 1, 7}, ClassCounts{3, 1, 3, 3}};
    c.total = 10;
    c.correct = 5;
    const MetricsReport m = compute_metrics(c);
    EXPECT_NEAR(m.per_class[0].f1, 0.8, 1e-15);
    EXPECT_NEAR(m.per_class[1].f1, 0.6, 1e-15);
    EXPECT_NEAR(m.macro_f1, 0.7, 1e-15);
}

TEST(Metrics, ZeroDenominators) {
    const std::vector<std::size_t> truth{0, 0, 0}, pred{0, 0, 0};
    const MetricsReport m = compute_metrics(confusion(truth, pred, space_of(2)));
    EXPECT_EQ(m.per_class[1].precision, 0.0);
    EXPECT_EQ(m.per_class[1].recall, 0.0);
    EXPECT_EQ(m.per_class[1].f1, 0.0);
    EXPECT_EQ(m.macro_f1, 0.5);
    EXPECT_TRUE(m.skewed());
}

TEST(Metrics, OracleEquivalence) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t classes = std::uniform_int_distribution<std::size_t>(2, 6)(rng);
        const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 200)(rng);
        std::uniform_int_distribution<std::size_t> label(0, classes - 1);
        std::vector<std::size_t> t(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = label(rng);
            p[i] = rng() % 3 == 0 ? t[i] : label(rng);
        }
        // Brute-force recount.
        std::vector<double> prec(classes), rec(classes), f(classes);
        double correct = 0, mp = 0, mr = 0, mf = 0;
        for (std::size_t c = 0; c < classes; ++c) {
            double tp = 0, fp = 0, fn = 0;
            for (std::size_t i = 0; i < n; ++i) {
                tp += t[i] == c && p[i] == c;
                fp += t[i] != c && p[i] == c;
                fn += t[i] == c && p[i] != c;
            }
            prec[c] = tp + fp > 0 ? tp / (tp + fp) : 0.0;
            rec[c] = tp + fn > 0 ? tp / (tp + fn) : 0.0;
            f[c] = prec[c] + rec[c] > 0 ? 2 * prec[c] * rec[c] / (prec[c] + rec[c]) : 0.0;
            mp += prec[c] / static_cast<double>(classes);
            mr += rec[c] / static_cast<double>(classes);
            mf += f[c] / static_cast<double>(classes);
        }
        for (std::size_t i = 0; i < n; ++i) correct += t[i] == p[i];

        const MetricsReport m = compute_metrics(confusion(t, p, space_of(classes)));
        for (std::size_t c = 0; c < classes; ++c) {
            ASSERT_NEAR(m.per_class[c].precision, prec[c], 1e-12);
            ASSERT_NEAR(m.per_class[c].recall, rec[c], 1e-12);
            ASSERT_NEAR(m.per_class[c].f1, f[c], 1e-12);
        }
        ASSERT_NEAR(m.macro_precision, mp, 1e-12);
        ASSERT_NEAR(m.macro_recall, mr, 1e-12);
        ASSERT_NEAR(m.macro_f1, mf, 1e-12);
        ASSERT_NEAR(m.accuracy, correct / static_cast<double>(n), 1e-12);
    }
}

TEST(Metrics, CountInvariants) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t classes = 2 + rng() % 5, n = 1 + rng() % 100;
        std::vector<std::size_t> t(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = rng() % classes;
            p[i] = rng() % classes;
        }
        const ConfusionCounts c = confusion(t, p, space_of(classes));
        std::size_t tp_sum = 0;
        for (const auto& k : c.per_class) {
            EXPECT_EQ(k.tp + k.fp + k.fn + k.tn, n);
            tp_sum += k.tp;
        }
        EXPECT_EQ(tp_sum, c.correct);
        const MetricsReport m = compute_metrics(c);
        for (const auto& k : m.per_class)
            for (double v : {k.precision, k.recall, k.f1, k.accuracy}) {
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0);
            }
    }
}

TEST(Metrics, BinaryOneVsRestAccuracyAgrees) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng() % 150;
        std::vector<std::size_t> t(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = rng() % 2;
            p[i] = rng() % 2;
        }
        const MetricsReport m = compute_metrics(confusion(t, p, kHN));
        EXPECT_EQ(m.per_class[0].accuracy, m.per_class[1].accuracy);
        EXPECT_NEAR(m.per_class[0].accuracy, m.accuracy, 1e-15);
    }
}

TEST(Metrics, MergedLabelsMatchDirectBinaryMetrics) {
    const LabelSpace multi = LabelSpace::mmhs150k();
    const LabelSpace binary = multi.binary_space();
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng() % 120;
        std::vector<std::string> t, p;
        std::vector<std::size_t> tb, pb;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t a = rng() % multi.size(), b = rng() % multi.size();
            t.push_back(merge_to_binary(multi.name(a), multi));
            p.push_back(merge_to_binary(multi.name(b), multi));
            // Directly in the binary space: hate iff not "No Hate".
            tb.push_back(*binary.find(multi.name(a) == "No Hate" ? "NoHate" : "Hate"));
            pb.push_back(*binary.find(multi.name(b) == "No Hate" ? "NoHate" : "Hate"));
        }
        const MetricsReport merged = compute_metrics(confusion(t, p, binary));
        const MetricsReport direct = compute_metrics(confusion(tb, pb, binary));
        EXPECT_EQ(merged.macro_f1, direct.macro_f1);
        EXPECT_EQ(merged.macro_precision, direct.macro_precision);
        EXPECT_EQ(merged.accuracy, direct.accuracy);
    }
}

TEST(Format, TableLayout) {
    const std::string table = format_table({{"GAN-Fusion", "text+visual", "gan", hand_example()}});
    EXPECT_NE(table.find("Model"), std::string::npos);
    EXPECT_NE(table.find("Input modes"), std::string::npos);
    EXPECT_NE(table.find("Fusion type"), std::string::npos);
    EXPECT_NE(table.find("|  79.17 |  80.00"), std::string::npos) << table;
    const std::string csv = format_csv({{"m", "text", "none", hand_example()}});
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "model,inputs,fusion,precision,recall,f1,accuracy,samples");
    EXPECT_NE(csv.find(",10\n"), std::string::npos);
    EXPECT_NE(format_report(hand_example()).find("macro"), std::string::npos);
}
