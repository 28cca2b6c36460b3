#include "fuselab/datakit.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <boost/beast/core/detail/base64.hpp>

#include "fuselab/errors.hpp"
#include "fuselab/random.hpp"
#include "json.hpp"

namespace fuselab {

using nlohmann::json;

// ---- label spaces ----

LabelSpace::LabelSpace(std::vector<std::string> names, LabelMode mode, std::map<std::string, std::string> merge)
    : names_(std::move(names)), mode_(mode), merge_(std::move(merge)) {
    if (names_.empty()) throw SchemaError("label space has no classes");
    std::set<std::string> unique(names_.begin(), names_.end());
    if (unique.size() != names_.size()) throw SchemaError("label space has duplicate class names");
    if (mode_ == LabelMode::binary && names_.size() != 2) throw SchemaError("binary label space needs exactly 2 classes");
    if (!merge_.empty()) {
        std::set<std::string> targets;
        for (const auto& n : names_) {
            auto it = merge_.find(n);
            if (it == merge_.end()) throw SchemaError("merge map does not cover class '" + n + "'");
            targets.insert(it->second);
        }
        if (merge_.size() != names_.size()) throw SchemaError("merge map names classes outside the label space");
        if (targets.size() != 2) throw SchemaError("merge map must target exactly 2 classes");
    }
}

LabelSpace LabelSpace::hate_binary() { return LabelSpace({"Hate", "NoHate"}, LabelMode::binary); }

LabelSpace LabelSpace::mmhs150k() {
    std::vector<std::string> names{"No Hate", "Racist", "Sexist", "Homophobic", "Religion-based", "Other Hate"};
    std::map<std::string, std::string> merge;
    for (const auto& n : names) merge[n] = n == "No Hate" ? "NoHate" : "Hate";
    return LabelSpace(std::move(names), LabelMode::multi, std::move(merge));
}

const std::string& LabelSpace::name(std::size_t index) const {
    if (index >= names_.size())
        throw SchemaError("label index " + std::to_string(index) + " outside a space of " + std::to_string(names_.size()));
    return names_[index];
}

std::optional<std::size_t> LabelSpace::find(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
}

std::size_t LabelSpace::index(const std::string& name) const {
    if (auto i = find(name)) return *i;
    throw SchemaError("unknown label '" + name + "'");
}

LabelSpace LabelSpace::binary_space() const {
    if (merge_.empty()) throw SchemaError("label space has no binary merge map");
    std::set<std::string> targets;
    for (const auto& [from, to] : merge_) targets.insert(to);
    return LabelSpace(std::vector<std::string>(targets.begin(), targets.end()), LabelMode::binary);
}

std::size_t LabelSpace::merge_index(std::size_t label) const {
    return binary_space().index(merge_to_binary(name(label), *this));
}

std::string merge_to_binary(const std::string& label, const LabelSpace& space) {
    auto it = space.merge_map().find(label);
    if (it == space.merge_map().end()) throw SchemaError("label '" + label + "' has no binary mapping");
    return it->second;
}

// ---- publications ----

void Publication::validate(const LabelSpace& space) const {
    const std::string where = id.empty() ? std::string("publication") : "publication '" + id + "'";
    if (!visual && !text) throw SchemaError(where + " has neither visual nor text");
    if (label >= space.size()) throw SchemaError(where + " label index out of range");
    if (visual) {
        if (visual->rank() != 1 && visual->rank() != 3)
            throw SchemaError(where + " visual must be an H x W x C grid or a feature vector");
        if (!visual->all_finite()) throw SchemaError(where + " visual has non-finite values");
    }
    if (entity_features) {
        if (entity_features->empty()) throw SchemaError(where + " entity_features is empty");
        for (double v : *entity_features)
            if (!std::isfinite(v)) throw SchemaError(where + " entity_features has non-finite values");
    }
}

std::vector<std::size_t> Dataset::histogram() const {
    std::vector<std::size_t> h(labels.size(), 0);
    for (const auto& p : items) ++h.at(p.label);
    return h;
}

std::string Dataset::histogram_string() const {
    std::ostringstream out;
    const auto h = histogram();
    for (std::size_t i = 0; i < h.size(); ++i) out << (i ? ", " : "") << labels.name(i) << ": " << h[i];
    return out.str();
}

void Dataset::validate() const {
    for (const auto& p : items) p.validate(labels);
}

Dataset Dataset::binarized() const {
    Dataset out;
    out.labels = labels.binary_space();
    out.items = items;
    for (auto& p : out.items) p.label = labels.merge_index(p.label);
    return out;
}

// ---- base64 ----

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    namespace b64 = boost::beast::detail::base64;
    std::string out(b64::encoded_size(bytes.size()), '\0');
    out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    namespace b64 = boost::beast::detail::base64;
    if (text.size() % 4 != 0) throw FormatError("base64 length is not a multiple of 4");
    std::vector<std::uint8_t> out(b64::decoded_size(text.size()));
    const auto [written, read] = b64::decode(out.data(), text.data(), text.size());
    std::size_t padding = 0;
    while (padding < 2 && padding < text.size() && text[text.size() - 1 - padding] == '=') ++padding;
    if (read + padding < text.size()) throw FormatError("invalid base64 character");
    out.resize(written);
    return out;
}

// ---- JSON Lines ----

namespace {

static_assert(std::endian::native == std::endian::little, "blob codec assumes a little-endian host");

double as_float(double v) { return static_cast<double>(static_cast<float>(v)); }

std::vector<double> number_array(const json& j, const char* what) {
    if (!j.is_array()) throw SchemaError(std::string(what) + " must be an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number()) throw SchemaError(std::string(what) + " must be an array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

Tensor parse_visual(const json& j) {
    if (j.is_object()) {
        for (const auto& [key, value] : j.items())
            if (key != "shape" && key != "data_b64") throw SchemaError("unknown visual field '" + key + "'");
        if (!j.contains("shape") || !j.contains("data_b64")) throw SchemaError("visual blob needs shape and data_b64");
        Shape shape;
        for (const auto& d : j.at("shape")) {
            if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) throw SchemaError("visual shape must be positive integers");
            shape.push_back(d.get<std::size_t>());
        }
        if (shape.size() != 3 && shape.size() != 1) throw SchemaError("visual blob shape must have rank 1 or 3");
        const auto bytes = base64_decode(j.at("data_b64").get<std::string>());
        if (bytes.size() != shape_size(shape) * sizeof(float)) throw SchemaError("visual blob size does not match its shape");
        std::vector<double> data(shape_size(shape));
        for (std::size_t i = 0; i < data.size(); ++i) {
            float f;
            std::memcpy(&f, bytes.data() + i * sizeof(float), sizeof(float));
            data[i] = f;
        }
        return Tensor(std::move(shape), std::move(data));
    }
    if (!j.is_array() || j.empty()) throw SchemaError("visual must be a non-empty array or a blob object");
    if (!j.front().is_array()) {
        auto values = number_array(j, "visual");
        const std::size_t n = values.size();
        return Tensor({n}, std::move(values));
    }
    const std::size_t h = j.size();
    if (j.front().empty() || !j.front().front().is_array()) throw SchemaError("visual grid must be nested H x W x C");
    const std::size_t w = j.front().size();
    const std::size_t c = j.front().front().size();
    if (c == 0) throw SchemaError("visual grid has no channels");
    std::vector<double> data;
    data.reserve(h * w * c);
    for (const auto& row : j) {
        if (!row.is_array() || row.size() != w) throw SchemaError("visual grid rows have unequal widths");
        for (const auto& cell : row) {
            auto values = number_array(cell, "visual cell");
            if (values.size() != c) throw SchemaError("visual grid cells have unequal channel counts");
            data.insert(data.end(), values.begin(), values.end());
        }
    }
    return Tensor({h, w, c}, std::move(data));
}

json visual_json(const Tensor& t, std::size_t blob_threshold) {
    if (t.numel() > blob_threshold) {
        std::vector<std::uint8_t> bytes(t.numel() * sizeof(float));
        for (std::size_t i = 0; i < t.numel(); ++i) {
            const float f = static_cast<float>(t[i]);
            std::memcpy(bytes.data() + i * sizeof(float), &f, sizeof(float));
        }
        return json{{"shape", t.shape()}, {"data_b64", base64_encode(bytes)}};
    }
    if (t.rank() == 1) {
        json arr = json::array();
        for (double v : t.data()) arr.push_back(static_cast<float>(v));
        return arr;
    }
    const std::size_t h = t.dim(0), w = t.dim(1), c = t.dim(2);
    json grid = json::array();
    for (std::size_t r = 0; r < h; ++r) {
        json row = json::array();
        for (std::size_t q = 0; q < w; ++q) {
            json cell = json::array();
            for (std::size_t k = 0; k < c; ++k) cell.push_back(static_cast<float>(t[(r * w + q) * c + k]));
            row.push_back(std::move(cell));
        }
        grid.push_back(std::move(row));
    }
    return grid;
}

struct RawRecord {
    Publication pub;
    std::string label;
};

RawRecord parse_record(const std::string& line) {
    const json j = json::parse(line);
    if (!j.is_object()) throw SchemaError("record is not a JSON object");
    static const std::set<std::string> known{"id", "visual", "text", "caption", "entity_features", "label"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw SchemaError("unknown field '" + key + "'");
    RawRecord r;
    if (!j.contains("label") || !j.at("label").is_string()) throw SchemaError("label must be a string");
    r.label = j.at("label").get<std::string>();
    if (j.contains("id")) {
        if (!j.at("id").is_string()) throw SchemaError("id must be a string");
        r.pub.id = j.at("id").get<std::string>();
    }
    auto opt_string = [&](const char* key) -> std::optional<std::string> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        if (!j.at(key).is_string()) throw SchemaError(std::string(key) + " must be a string");
        return j.at(key).get<std::string>();
    };
    r.pub.text = opt_string("text");
    r.pub.caption = opt_string("caption");
    if (j.contains("visual") && !j.at("visual").is_null()) r.pub.visual = parse_visual(j.at("visual"));
    if (j.contains("entity_features") && !j.at("entity_features").is_null())
        r.pub.entity_features = number_array(j.at("entity_features"), "entity_features");
    return r;
}

}  // namespace

Dataset load_jsonl(const std::filesystem::path& path, const std::optional<LabelSpace>& space) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open data file " + path.string());
    std::vector<std::pair<std::size_t, RawRecord>> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            records.emplace_back(line_no, parse_record(line));
        } catch (const json::exception& e) {
            throw ParseError(line_no, path.string() + ": " + e.what());
        } catch (const SchemaError& e) {
            throw ParseError(line_no, path.string() + ": " + e.what());
        } catch (const FormatError& e) {
            throw ParseError(line_no, path.string() + ": " + e.what());
        }
    }
    Dataset data;
    if (space) {
        data.labels = *space;
    } else {
        std::set<std::string> names;
        for (const auto& [n, r] : records) names.insert(r.label);
        if (names.empty()) throw SchemaError(path.string() + " contains no records");
        data.labels = LabelSpace(std::vector<std::string>(names.begin(), names.end()),
                                 names.size() == 2 ? LabelMode::binary : LabelMode::multi);
    }
    data.items.reserve(records.size());
    for (auto& [n, r] : records) {
        const auto label = data.labels.find(r.label);
        if (!label) throw SchemaError(path.string() + " line " + std::to_string(n) + ": unknown label '" + r.label + "'");
        r.pub.label = *label;
        r.pub.validate(data.labels);
        data.items.push_back(std::move(r.pub));
    }
    return data;
}

void write_jsonl(const std::filesystem::path& path, const Dataset& data, std::size_t blob_threshold) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    for (const auto& p : data.items) {
        p.validate(data.labels);
        json j;
        j["id"] = p.id;
        if (p.visual) j["visual"] = visual_json(*p.visual, blob_threshold);
        if (p.text) j["text"] = *p.text;
        if (p.caption) j["caption"] = *p.caption;
        if (p.entity_features) {
            json arr = json::array();
            for (double v : *p.entity_features) arr.push_back(static_cast<float>(v));
            j["entity_features"] = std::move(arr);
        }
        j["label"] = data.labels.name(p.label);
        out << j.dump() << '\n';
    }
    if (!out) throw ConfigError("failed writing " + path.string());
}

// ---- synthetic data ----

std::string to_string(SyntheticTask task) {
    return task == SyntheticTask::xor_crossmodal ? "xor-crossmodal" : "unimodal-separable";
}

SyntheticTask synthetic_task_from_string(const std::string& name) {
    if (name == "xor-crossmodal") return SyntheticTask::xor_crossmodal;
    if (name == "unimodal-separable") return SyntheticTask::unimodal_separable;
    throw ConfigError("unknown synthetic task '" + name + "'");
}

std::vector<std::string> SyntheticSpec::default_vocabulary() {
    return {"the",  "a",     "people", "day",  "time",  "today", "really", "just", "think", "see",
            "good", "world", "life",   "new",  "love",  "home",  "work",   "city", "night", "still"};
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n == 0) throw ConfigError("synthetic n must be at least 1");
    if (spec.grid < 6) throw ConfigError("synthetic grid must be at least 6");
    if (spec.grid > 256) throw ConfigError("synthetic grid must be at most 256");
    if (!(spec.noise >= 0.0) || !std::isfinite(spec.noise)) throw ConfigError("synthetic noise must be finite and >= 0");
    if (spec.vocabulary.empty()) throw ConfigError("synthetic vocabulary is empty");
    const auto& vocab = spec.vocabulary;
    for (const auto& w : vocab)
        if (w.empty() || w == "apple" || w == "river" || w.find_first_of(" \t\n") != std::string::npos)
            throw ConfigError("synthetic vocabulary words must be non-empty single words other than the keywords");

    Rng rng = make_rng(spec.seed, 0);
    std::bernoulli_distribution coin(0.5);
    std::bernoulli_distribution flip(std::min(spec.noise, 0.5));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> length(4, 8);
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);

    const std::size_t g = spec.grid;
    const std::size_t half = g / 2;
    std::uniform_int_distribution<std::size_t> row(0, g - 2);
    std::uniform_int_distribution<std::size_t> col(0, half - 2);

    SyntheticData out;
    out.data.labels = LabelSpace({"class0", "class1"}, LabelMode::binary);
    out.data.items.reserve(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const int a = coin(rng) ? 1 : 0;
        const int b = spec.task == SyntheticTask::xor_crossmodal ? (coin(rng) ? 1 : 0) : a;
        const int label = spec.task == SyntheticTask::xor_crossmodal ? a ^ b : a;

        Tensor grid({g, g, 1});
        const std::size_t r0 = row(rng);
        const std::size_t c0 = col(rng) + (a ? g - half : 0);
        for (std::size_t r = r0; r < r0 + 2; ++r)
            for (std::size_t c = c0; c < c0 + 2; ++c) grid[r * g + c] = 1.0;
        if (spec.noise > 0.0)
            for (double& v : grid.data()) v += spec.noise * gauss(rng);
        for (double& v : grid.data()) v = as_float(v);

        const int shown = flip(rng) ? 1 - b : b;
        const std::size_t len = length(rng);
        std::uniform_int_distribution<std::size_t> slot(0, len);
        const std::size_t at = slot(rng);
        std::string text;
        for (std::size_t k = 0; k <= len; ++k) {
            if (!text.empty()) text += ' ';
            text += k == at ? (shown ? "river" : "apple") : vocab[pick(rng)];
        }

        Publication p;
        p.id = "syn-" + std::to_string(i);
        p.visual = std::move(grid);
        p.text = std::move(text);
        p.label = static_cast<std::size_t>(label);
        out.data.items.push_back(std::move(p));
        out.bit_a.push_back(a);
        out.bit_b.push_back(b);
    }
    return out;
}

// ---- splitting and batching ----

Split split_indices(std::size_t n, const SplitRatios& ratios, std::uint64_t seed) {
    const double total = ratios.train + ratios.val + ratios.test;
    if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 || std::abs(total - 1.0) > 1e-9)
        throw ConfigError("split ratios must be non-negative and sum to 1");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(seed, 1);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(ratios.train * static_cast<double>(n))));
    const auto n_val =
        std::min<std::size_t>(n - n_train, static_cast<std::size_t>(std::llround(ratios.val * static_cast<double>(n))));
    Split s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    return s;
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& indices, std::size_t batch_size) {
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < indices.size(); i += batch_size)
        out.emplace_back(indices.begin() + static_cast<std::ptrdiff_t>(i),
                         indices.begin() + static_cast<std::ptrdiff_t>(std::min(indices.size(), i + batch_size)));
    return out;
}

SplitBatches split_and_batch(const Dataset& data, const SplitRatios& ratios, std::size_t batch_size, std::uint64_t seed) {
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    SplitBatches out;
    out.split = split_indices(data.size(), ratios, seed);
    out.train = make_batches(out.split.train, batch_size);
    out.val = make_batches(out.split.val, batch_size);
    out.test = make_batches(out.split.test, batch_size);
    return out;
}

}  // namespace fuselab
