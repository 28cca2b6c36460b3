#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fuselab/tensor.hpp"

namespace fuselab {

enum class LabelMode { binary, multi };

/// Ordered class names. A multi-class space may carry a merge map onto a
/// two-class space.
class LabelSpace {
public:
    LabelSpace() = default;
    LabelSpace(std::vector<std::string> names, LabelMode mode, std::map<std::string, std::string> merge = {});

    // {Hate, NoHate}
    static LabelSpace hate_binary();
    // No Hate, Racist, Sexist, Homophobic, Religion-based, Other Hate; merges onto hate_binary().
    static LabelSpace mmhs150k();

    std::size_t size() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    const std::string& name(std::size_t index) const;
    std::optional<std::size_t> find(const std::string& name) const;
    // SchemaError for unknown names.
    std::size_t index(const std::string& name) const;
    LabelMode mode() const noexcept { return mode_; }

    bool has_merge() const noexcept { return !merge_.empty(); }
    const std::map<std::string, std::string>& merge_map() const noexcept { return merge_; }
    // Target space of the merge map (names sorted).
    LabelSpace binary_space() const;
    std::size_t merge_index(std::size_t label) const;

    friend bool operator==(const LabelSpace&, const LabelSpace&) = default;

private:
    std::vector<std::string> names_;
    LabelMode mode_ = LabelMode::multi;
    std::map<std::string, std::string> merge_;
};

// SchemaError when the label is not mapped.
std::string merge_to_binary(const std::string& label, const LabelSpace& space);

struct Publication {
    std::string id;
    // H x W x C grid, or a rank-1 precomputed feature vector.
    std::optional<Tensor> visual;
    // Absent means no text modality; an empty string is valid text.
    std::optional<std::string> text;
    std::optional<std::string> caption;
    std::optional<std::vector<double>> entity_features;
    std::size_t label = 0;

    bool has_grid() const noexcept { return visual && visual->rank() == 3; }
    bool has_feature_vector() const noexcept { return visual && visual->rank() == 1; }
    // SchemaError when no modality is present, the label is out of range or
    // values are not finite.
    void validate(const LabelSpace& space) const;

    friend bool operator==(const Publication&, const Publication&) = default;
};

struct Dataset {
    std::vector<Publication> items;
    LabelSpace labels;

    std::size_t size() const noexcept { return items.size(); }
    bool empty() const noexcept { return items.empty(); }
    std::vector<std::size_t> histogram() const;
    std::string histogram_string() const;
    void validate() const;
    // Same publications relabelled into the merged binary space.
    Dataset binarized() const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

// ---- JSON Lines ----

/// One publication per line: id, visual, text, caption, entity_features,
/// label (class name). "visual" is a nested H x W x C array, a flat feature
/// array, or {"shape": [...], "data_b64": "..."} holding little-endian
/// float32 values. Without a label space the space is the sorted set of
/// label names found in the file.
Dataset load_jsonl(const std::filesystem::path& path, const std::optional<LabelSpace>& space = std::nullopt);

/// Grids with more than blob_threshold values are written as base64 blobs.
/// Values are written at float32 precision either way.
void write_jsonl(const std::filesystem::path& path, const Dataset& data, std::size_t blob_threshold = 256);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

// ---- synthetic data ----

enum class SyntheticTask { xor_crossmodal, unimodal_separable };

std::string to_string(SyntheticTask task);
SyntheticTask synthetic_task_from_string(const std::string& name);

struct SyntheticSpec {
    SyntheticTask task = SyntheticTask::xor_crossmodal;
    std::size_t n = 1000;
    std::uint64_t seed = 1;
    // Gaussian std on the grid and keyword flip probability (capped at 0.5) on the text.
    double noise = 0.0;
    std::size_t grid = 8;
    static std::vector<std::string> default_vocabulary();

    // Filler words; the keywords "apple" and "river" are reserved.
    std::vector<std::string> vocabulary = default_vocabulary();
};

/// Bit a is rendered as a 2x2 patch in the left (0) or right (1) half of the
/// grid; bit b as the keyword "apple" (0) or "river" (1) among 4 to 8 filler
/// words. xor-crossmodal labels a xor b; unimodal-separable sets b = a and
/// labels a. Classes are "class0" and "class1".
struct SyntheticData {
    Dataset data;
    std::vector<int> bit_a;
    std::vector<int> bit_b;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// ---- splitting and batching ----

struct SplitRatios {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

/// Seeded shuffle, then round(n * train) and round(n * val) items; the test
/// part takes the rest.
Split split_indices(std::size_t n, const SplitRatios& ratios, std::uint64_t seed);

/// Consecutive batches of the given indices; the last batch may be short.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& indices, std::size_t batch_size);

struct SplitBatches {
    Split split;
    std::vector<std::vector<std::size_t>> train;
    std::vector<std::vector<std::size_t>> val;
    std::vector<std::vector<std::size_t>> test;
};

SplitBatches split_and_batch(const Dataset& data, const SplitRatios& ratios, std::size_t batch_size, std::uint64_t seed);

}  // namespace fuselab
