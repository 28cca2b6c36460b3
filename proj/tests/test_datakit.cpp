#include <cmath>
#include <fstream>
#include <set>

#include "fuselab/datakit.hpp"
#include "fuselab/errors.hpp"
#include "support.hpp"

using namespace fuselab;

namespace {

SyntheticData synth(std::size_t n, std::uint64_t seed, double noise = 0.0,
                    SyntheticTask task = SyntheticTask::xor_crossmodal) {
    SyntheticSpec s;
    s.task = task;
    s.n = n;
    s.seed = seed;
    s.noise = noise;
    return generate_synthetic(s);
}

double entropy2(const std::vector<double>& p) {
    double h = 0;
    for (double v : p)
        if (v > 0) h -= v * std::log2(v);
    return h;
}

// Empirical I(x; y) in bits for binary variables.
double mutual_information(const std::vector<int>& x, const std::vector<int>& y) {
    double joint[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < x.size(); ++i) joint[x[i]][y[i]] += 1.0 / static_cast<double>(x.size());
    const double px1 = joint[1][0] + joint[1][1], py1 = joint[0][1] + joint[1][1];
    return entropy2({1 - px1, px1}) + entropy2({1 - py1, py1}) -
           entropy2({joint[0][0], joint[0][1], joint[1][0], joint[1][1]});
}

// Which half of a grid holds the patch.
int patch_side(const Tensor& grid) {
    const std::size_t g = grid.dim(0);
    double left = 0, right = 0;
    for (std::size_t r = 0; r < g; ++r)
        for (std::size_t c = 0; c < g; ++c) (c < g / 2 ? left : right) += grid[r * g + c];
    return right > left ? 1 : 0;
}

int keyword_bit(const std::string& text) { return text.find("river") != std::string::npos ? 1 : 0; }

}  // namespace

TEST(LabelSpace, MergeExamples) {
    const LabelSpace s = LabelSpace::mmhs150k();
    EXPECT_EQ(merge_to_binary("Racist", s), "Hate");
    EXPECT_EQ(merge_to_binary("Religion-based", s), "Hate");
    EXPECT_EQ(merge_to_binary("No Hate", s), "NoHate");
    EXPECT_THROW(merge_to_binary("Spam", s), SchemaError);
}

TEST(LabelSpace, MergeIsTotalAndSurjective) {
    const LabelSpace s = LabelSpace::mmhs150k();
    EXPECT_EQ(s.size(), 6u);
    std::set<std::string> image;
    for (const auto& name : s.names()) image.insert(merge_to_binary(name, s));
    EXPECT_EQ(image, (std::set<std::string>{"Hate", "NoHate"}));
    EXPECT_EQ(s.binary_space(), LabelSpace::hate_binary());
    for (std::size_t i = 0; i < s.size(); ++i)
        EXPECT_EQ(s.binary_space().name(s.merge_index(i)), merge_to_binary(s.name(i), s));
}

TEST(LabelSpace, MergeMustCoverEveryClass) {
    EXPECT_THROW(LabelSpace({"a", "b", "c"}, LabelMode::multi, {{"a", "x"}, {"b", "y"}}), SchemaError);
    EXPECT_THROW(LabelSpace({"a", "b", "c"}, LabelMode::binary), SchemaError);
}

TEST(Jsonl, RoundTripOfSyntheticPublications) {
    test::TempDir dir;
    for (double noise : {0.0, 0.3}) {
        Dataset data = synth(10, 4, noise).data;
        data.items[2].caption = "a caption";
        data.items[5].entity_features = std::vector<double>{0.5, -2.0, 8.0};
        for (std::size_t threshold : {0, 256, 100000}) {
            write_jsonl(dir / "d.jsonl", data, threshold);
            EXPECT_EQ(load_jsonl(dir / "d.jsonl", data.labels), data) << noise << " " << threshold;
        }
    }
}

TEST(Jsonl, TruncatedLineNamesItsNumber) {
    test::TempDir dir;
    write_jsonl(dir / "d.jsonl", synth(5, 2).data);
    std::string text = test::read_file(dir / "d.jsonl");
    std::vector<std::string> lines;
    for (std::size_t pos = 0, next; pos < text.size(); pos = next + 1) {
        next = text.find('\n', pos);
        lines.push_back(text.substr(pos, next - pos));
    }
    lines[2] = lines[2].substr(0, lines[2].size() / 2);
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    test::write_file(dir / "d.jsonl", out);
    try {
        load_jsonl(dir / "d.jsonl");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
}

TEST(Jsonl, MissingCaptionLoadsAsAbsent) {
    test::TempDir dir;
    test::write_file(dir / "d.jsonl",
                     "{\"id\":\"p1\",\"text\":\"hello there\",\"label\":\"Hate\"}\n"
                     "{\"id\":\"p2\",\"text\":\"\",\"caption\":\"sign\",\"visual\":[0.5,1.5],\"label\":\"NoHate\"}\n");
    const Dataset d = load_jsonl(dir / "d.jsonl");
    ASSERT_EQ(d.size(), 2u);
    EXPECT_FALSE(d.items[0].caption);
    EXPECT_EQ(d.items[1].caption, "sign");
    EXPECT_EQ(d.items[1].text, "");
    EXPECT_TRUE(d.items[1].has_feature_vector());
    EXPECT_EQ(d.labels.names(), (std::vector<std::string>{"Hate", "NoHate"}));
    EXPECT_EQ(d.histogram(), (std::vector<std::size_t>{1, 1}));
}

TEST(Jsonl, SchemaViolations) {
    test::TempDir dir;
    test::write_file(dir / "a.jsonl", "{\"id\":\"p1\",\"label\":\"Hate\"}\n");
    EXPECT_THROW(load_jsonl(dir / "a.jsonl"), SchemaError);
    test::write_file(dir / "b.jsonl", "{\"id\":\"p1\",\"text\":\"x\",\"label\":\"Maybe\"}\n");
    EXPECT_THROW(load_jsonl(dir / "b.jsonl", LabelSpace::hate_binary()), SchemaError);
    test::write_file(dir / "c.jsonl", "{\"id\":\"p1\",\"text\":\"x\",\"label\":\"Hate\",\"colour\":1}\n");
    EXPECT_THROW(load_jsonl(dir / "c.jsonl"), ParseError);
    EXPECT_THROW(load_jsonl(dir / "missing.jsonl"), ConfigError);
}

TEST(Base64, RoundTrip) {
    const std::vector<std::uint8_t> bytes{0, 1, 2, 250, 255, 17, 99};
    for (std::size_t n = 0; n <= bytes.size(); ++n) {
        const std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(n));
        EXPECT_EQ(base64_decode(base64_encode(part)), part);
    }
    EXPECT_EQ(base64_encode({'f', 'o', 'o'}), "Zm9v");
}

TEST(Synthetic, SameSeedSameData) {
    EXPECT_EQ(synth(200, 42, 0.2).data, synth(200, 42, 0.2).data);
    EXPECT_NE(synth(200, 42, 0.2).data, synth(200, 43, 0.2).data);
}

TEST(Synthetic, LabelBalance) {
    const Dataset d = synth(10000, 1).data;
    const double ones = static_cast<double>(d.histogram()[1]) / 10000.0;
    EXPECT_NEAR(ones, 0.5, 0.02);
}

TEST(Synthetic, ModalitiesCarryTheirBits) {
    const SyntheticData s = synth(500, 9);
    for (std::size_t i = 0; i < 500; ++i) {
        EXPECT_EQ(patch_side(*s.data.items[i].visual), s.bit_a[i]);
        EXPECT_EQ(keyword_bit(*s.data.items[i].text), s.bit_b[i]);
        EXPECT_EQ(static_cast<int>(s.data.items[i].label), s.bit_a[i] ^ s.bit_b[i]);
    }
}

TEST(Synthetic, SingleModalityBayesAccuracyIsOneHalf) {
    // Four equiprobable (a, b) cells; label = a xor b.
    for (int observed : {0, 1}) {
        double correct = 0;
        for (int v : {0, 1}) {
            double p_label[2] = {0, 0};
            for (int a : {0, 1})
                for (int b : {0, 1})
                    if ((observed == 0 ? a : b) == v) p_label[a ^ b] += 0.25;
            correct += std::max(p_label[0], p_label[1]);
        }
        EXPECT_EQ(correct, 0.5);
    }
    // The generated cells are close to equiprobable.
    const SyntheticData s = synth(10000, 1);
    double cells[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < 10000; ++i) cells[s.bit_a[i]][s.bit_b[i]] += 1e-4;
    for (auto& row : cells)
        for (double c : row) EXPECT_NEAR(c, 0.25, 0.02);
}

TEST(Synthetic, EachBitCarriesNoLabelInformation) {
    const SyntheticData s = synth(10000, 1);
    std::vector<int> label;
    for (const auto& p : s.data.items) label.push_back(static_cast<int>(p.label));
    EXPECT_LT(mutual_information(s.bit_a, label), 0.01);
    EXPECT_LT(mutual_information(s.bit_b, label), 0.01);
    EXPECT_GT(mutual_information(s.bit_a, s.bit_a), 0.99);
}

TEST(Synthetic, UnimodalTaskIsSeparable) {
    const SyntheticData s = synth(300, 3, 0.0, SyntheticTask::unimodal_separable);
    for (std::size_t i = 0; i < 300; ++i) EXPECT_EQ(static_cast<int>(s.data.items[i].label), patch_side(*s.data.items[i].visual));
}

TEST(Synthetic, InvalidSpecs) {
    SyntheticSpec s;
    s.vocabulary.clear();
    EXPECT_THROW(generate_synthetic(s), ConfigError);
    s = {};
    s.grid = 3;
    EXPECT_THROW(generate_synthetic(s), ConfigError);
    s = {};
    s.n = 0;
    EXPECT_THROW(generate_synthetic(s), ConfigError);
    s = {};
    s.vocabulary = {"apple"};
    EXPECT_THROW(generate_synthetic(s), ConfigError);
    EXPECT_THROW(synthetic_task_from_string("parity"), ConfigError);
}

TEST(Split, EightyTenTen) {
    const Split s = split_indices(100, {0.8, 0.1, 0.1}, 1);
    EXPECT_EQ(s.train.size(), 80u);
    EXPECT_EQ(s.val.size(), 10u);
    EXPECT_EQ(s.test.size(), 10u);
}

TEST(Split, PartitionLaw) {
    for (std::size_t n : {1, 7, 100, 1001})
        for (std::uint64_t seed : {1, 2, 3}) {
            const Split s = split_indices(n, {0.6, 0.1, 0.3}, seed);
            std::multiset<std::size_t> all;
            for (const auto* part : {&s.train, &s.val, &s.test}) all.insert(part->begin(), part->end());
            EXPECT_EQ(all.size(), n);
            EXPECT_EQ(std::set<std::size_t>(all.begin(), all.end()).size(), n);
            EXPECT_EQ(*all.rbegin(), n - 1);
        }
}

TEST(Split, BatchOrderIsDeterministic) {
    const Dataset d = synth(103, 5).data;
    const SplitBatches a = split_and_batch(d, {0.8, 0.1, 0.1}, 16, 11);
    const SplitBatches b = split_and_batch(d, {0.8, 0.1, 0.1}, 16, 11);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    EXPECT_NE(a.split.train, split_and_batch(d, {0.8, 0.1, 0.1}, 16, 12).split.train);
    // 82 training items: five full batches and a retained partial one
    ASSERT_EQ(a.train.size(), 6u);
    EXPECT_EQ(a.train.back().size(), 2u);
}

TEST(Split, BadArguments) {
    EXPECT_THROW(make_batches({1, 2, 3}, 0), ConfigError);
    EXPECT_THROW(split_indices(10, {0.5, 0.1, 0.1}, 1), ConfigError);
    EXPECT_THROW(split_indices(10, {1.2, -0.1, -0.1}, 1), ConfigError);
}
