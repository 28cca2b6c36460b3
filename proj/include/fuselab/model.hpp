#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fuselab/datakit.hpp"
#include "fuselab/fusion.hpp"
#include "fuselab/layers.hpp"
#include "fuselab/textprep.hpp"

namespace fuselab {

enum class InputMode { text, visual, multimodal };

std::string to_string(InputMode mode);
InputMode input_mode_from_string(const std::string& name);

struct ModelConfig {
    InputMode inputs = InputMode::multimodal;
    std::size_t latent_dim = 64;
    // text encoder
    std::size_t embed_dim = 32;
    std::size_t hidden_dim = 32;
    bool use_caption = true;
    // visual encoder; visual_features > 0 switches to precomputed feature vectors
    std::size_t channels = 1;
    std::size_t conv1_channels = 8;
    std::size_t conv2_channels = 16;
    std::size_t pool_cells = 2;
    std::size_t max_grid = 256;
    std::size_t visual_features = 0;
    // fusion; fusion.latent_dim follows latent_dim
    FusionConfig fusion;
    // Entity-tuple embedding appended to z_fuse; unset means on for text-only models.
    std::optional<bool> entity_tuple;
    // Width of Publication::entity_features appended to z_fuse (0 = unused).
    std::size_t entity_feature_dim = 0;

    bool uses_text() const noexcept { return inputs != InputMode::visual; }
    bool uses_visual() const noexcept { return inputs != InputMode::text; }
    bool tuple_enabled() const noexcept { return entity_tuple.value_or(inputs == InputMode::text); }
    // ConfigError on inconsistent settings.
    void validate() const;
    FusionConfig resolved_fusion() const;
};

/// Token strings to ids. Id 0 is [oov], id 1 is [empty] (stand-in for empty text).
class Vocabulary {
public:
    static constexpr std::size_t oov = 0;
    static constexpr std::size_t empty = 1;

    Vocabulary();
    explicit Vocabulary(std::vector<std::string> tokens);
    // Tokens seen at least min_count times, ordered by first appearance.
    static Vocabulary build(const std::vector<std::vector<std::string>>& documents, std::size_t min_count = 1);

    std::size_t id(const std::string& token) const;
    std::size_t size() const noexcept { return tokens_.size(); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }
    // Never empty: an empty document encodes as {empty}.
    std::vector<std::size_t> encode(const std::vector<std::string>& document) const;

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Normalization plus part-of-speech lexicon for publication text.
class TextPipeline {
public:
    TextPipeline() = default;
    TextPipeline(Lexicon lexicon, PosLexicon pos);
    // words.tsv, emoticons.tsv, typos.tsv and pos.tsv from dir.
    static TextPipeline load(const std::filesystem::path& dir);

    // Normalized token surfaces of the text, followed by the caption's when use_caption.
    std::vector<std::string> tokens(const Publication& p, bool use_caption) const;
    // Entity-tuple words of the text (caption excluded).
    std::vector<std::string> tuple_words(const Publication& p) const;

    const Lexicon& lexicon() const noexcept { return lexicon_; }
    const PosLexicon& pos() const noexcept { return pos_; }

private:
    Lexicon lexicon_;
    PosLexicon pos_;
};

/// A publication turned into model inputs.
struct PreparedSample {
    std::vector<std::size_t> tokens;
    std::vector<std::size_t> tuple;
    std::optional<Tensor> visual;
    std::optional<Tensor> entity;
    std::size_t label = 0;
};

struct Latents {
    std::optional<Var> text;    // z_t [B, d]
    std::optional<Var> visual;  // z_v [B, d]
};

struct ModelOutput {
    Latents latents;
    FusionOutput fusion;
    Var logits;  // [B, C]
    Var probs;   // [B, C]
};

/// Encoders, fusion mechanism, optional entity-tuple embedding and the
/// softmax classifier.
class FusionModel {
public:
    FusionModel() = default;
    FusionModel(const ModelConfig& config, Vocabulary vocabulary, LabelSpace labels);

    // Per-component seeded initialization.
    void init(std::uint64_t seed);

    // InputError when a required modality is missing.
    PreparedSample prepare(const Publication& p, const TextPipeline& text) const;
    std::vector<PreparedSample> prepare(const Dataset& data, const TextPipeline& text) const;

    Latents encode(Graph& g, std::span<const PreparedSample* const> batch) const;
    // Fusion and classifier on given latents. noise null = zero GAN noise.
    ModelOutput head(Graph& g, std::span<const PreparedSample* const> batch, const Latents& latents, Rng* noise) const;
    ModelOutput forward(Graph& g, std::span<const PreparedSample* const> batch, Rng* noise) const;

    const ModelConfig& config() const noexcept { return config_; }
    const Vocabulary& vocabulary() const noexcept { return vocab_; }
    const LabelSpace& labels() const noexcept { return labels_; }
    std::size_t classifier_input_dim() const noexcept { return classifier_.in_dim(); }

    RecurrentTextEncoder& text_encoder() noexcept { return text_; }
    ConvVisualEncoder& visual_encoder() noexcept { return visual_; }
    FeatureVisualEncoder& feature_encoder() noexcept { return features_; }
    Fusion& fusion() noexcept { return fusion_; }
    const Fusion& fusion() const noexcept { return fusion_; }
    DenseLayer& classifier() noexcept { return classifier_; }

    // Names: text.*, visual.*, fusion.*, classifier.*
    void for_each_parameter(const ParamVisitor& f);
    void for_each_parameter(const ConstParamVisitor& f) const;
    std::vector<std::pair<std::string, Tensor*>> parameters();

private:
    ModelConfig config_;
    Vocabulary vocab_;
    LabelSpace labels_;
    RecurrentTextEncoder text_;
    ConvVisualEncoder visual_;
    FeatureVisualEncoder features_;
    Fusion fusion_;
    DenseLayer classifier_;
};

/// -sum_l t(l) log y(l), averaged over rows. t and y are [B, C]; y is
/// clamped below by the log epsilon.
Var cross_entropy(Var targets, Var probs);
double cross_entropy(std::span<const double> targets, std::span<const double> probs);

// [B, C] rows one-hot at the labels, scaled by class weights when given.
Tensor one_hot(std::span<const std::size_t> labels, std::size_t classes, std::span<const double> class_weights = {});

struct Prediction {
    std::vector<double> distribution;
    std::size_t label = 0;
};

// Argmax with the lowest index winning ties.
std::size_t argmax(std::span<const double> values);

/// Zero-noise inference over prepared samples, fanned out over threads.
std::vector<Prediction> predict(const FusionModel& model, std::span<const PreparedSample> samples,
                                std::size_t threads = 1, std::size_t batch_size = 64);
Prediction predict(const FusionModel& model, const TextPipeline& text, const Publication& p);

}  // namespace fuselab
