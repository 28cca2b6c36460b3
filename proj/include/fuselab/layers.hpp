#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fuselab/graph.hpp"
#include "fuselab/random.hpp"

namespace fuselab {

using ParamVisitor = std::function<void(const std::string& name, Tensor& tensor)>;
using ConstParamVisitor = std::function<void(const std::string& name, const Tensor& tensor)>;

enum class Activation { identity, sigmoid, tanh, relu, softmax };

Var activate(Var x, Activation act);
std::string to_string(Activation act);
Activation activation_from_string(const std::string& name);

/// Fully connected layer y = act(W x + b), W stored out x in.
class DenseLayer {
public:
    DenseLayer() = default;
    DenseLayer(std::size_t in, std::size_t out, Activation act);

    void init_glorot(Rng& rng);

    // x [B, in] -> [B, out]
    Var forward(Graph& g, Var x) const;
    // Single vector convenience: x [in] -> [out].
    Tensor apply(const Tensor& x) const;

    std::size_t in_dim() const noexcept { return weight_.dim(1); }
    std::size_t out_dim() const noexcept { return weight_.dim(0); }
    Activation activation() const noexcept { return act_; }

    Tensor& weight() noexcept { return weight_; }
    const Tensor& weight() const noexcept { return weight_; }
    Tensor& bias() noexcept { return bias_; }
    const Tensor& bias() const noexcept { return bias_; }

    void for_each_parameter(const std::string& prefix, const ParamVisitor& f);
    void for_each_parameter(const std::string& prefix, const ConstParamVisitor& f) const;

private:
    Tensor weight_{{1, 1}};
    Tensor bias_{{1}};
    Activation act_ = Activation::identity;
};

/// Token id -> dense vector. Ids outside the table map to the OOV row.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    EmbeddingTable(std::size_t vocab, std::size_t dim, std::size_t oov_index = 0);

    void init_uniform(double bound, Rng& rng);
    void init_normal(double stddev, Rng& rng);

    // [ids.size(), dim]
    Var lookup(Graph& g, std::span<const std::size_t> ids) const;
    std::size_t resolve(std::size_t id) const noexcept { return id < vocab() ? id : oov_; }

    std::size_t vocab() const noexcept { return matrix_.dim(0); }
    std::size_t dim() const noexcept { return matrix_.dim(1); }
    std::size_t oov_index() const noexcept { return oov_; }
    Tensor& matrix() noexcept { return matrix_; }
    const Tensor& matrix() const noexcept { return matrix_; }

    void for_each_parameter(const std::string& prefix, const ParamVisitor& f);
    void for_each_parameter(const std::string& prefix, const ConstParamVisitor& f) const;

private:
    Tensor matrix_{{1, 1}};
    std::size_t oov_ = 0;
};

struct TextEncoderConfig {
    std::size_t vocab = 2;
    std::size_t embed_dim = 32;
    std::size_t hidden_dim = 32;  // per direction
    std::size_t latent_dim = 64;
};

struct EncodedText {
    Var latent;     // [B, latent_dim]
    Var attention;  // [B, T]
};

/// Bidirectional LSTM over embedded tokens, dot-product attention against a
/// learned query, tanh projection of the attended context to the latent.
///
/// Gate rows of each direction's weight are stacked input, forget, output,
/// candidate; the weight acts on [x_t; h_{t-1}].
class RecurrentTextEncoder {
public:
    struct Direction {
        Tensor weight;  // [4H, E + H]
        Tensor bias;    // [4H]
    };

    RecurrentTextEncoder() = default;
    explicit RecurrentTextEncoder(const TextEncoderConfig& config);

    // Embeddings N(0, 1); recurrent weights uniform [-0.08, 0.08], forget-gate bias 1.
    void init(Rng& rng);

    // All sequences in the batch must share one length >= 1.
    EncodedText encode(Graph& g, std::span<const std::vector<std::size_t>> batch) const;
    // Single sequence.
    EncodedText encode(Graph& g, std::span<const std::size_t> tokens) const;

    const TextEncoderConfig& config() const noexcept { return config_; }
    std::size_t latent_dim() const noexcept { return config_.latent_dim; }

    EmbeddingTable& embedding() noexcept { return embedding_; }
    const EmbeddingTable& embedding() const noexcept { return embedding_; }
    Direction& forward_direction() noexcept { return fwd_; }
    Direction& backward_direction() noexcept { return bwd_; }
    Tensor& query() noexcept { return query_; }
    DenseLayer& projection() noexcept { return projection_; }

    void for_each_parameter(const std::string& prefix, const ParamVisitor& f);
    void for_each_parameter(const std::string& prefix, const ConstParamVisitor& f) const;

private:
    std::vector<Var> run_direction(Graph& g, const Direction& dir, std::span<const Var> inputs, bool reverse) const;

    TextEncoderConfig config_;
    EmbeddingTable embedding_;
    Direction fwd_;
    Direction bwd_;
    Tensor query_{{1, 1}};  // [2H, 1]
    DenseLayer projection_;
};

struct VisualEncoderConfig {
    std::size_t channels = 1;
    std::size_t conv1_channels = 8;
    std::size_t conv2_channels = 16;
    std::size_t pool_cells = 2;
    std::size_t latent_dim = 64;
    std::size_t max_grid = 256;

    // Two valid 3x3 convolutions shrink each side by 4, then pooling needs pool_cells.
    std::size_t min_grid() const noexcept { return 4 + pool_cells; }
};

/// conv3x3 -> relu -> conv3x3 -> relu -> adaptive max-pool -> tanh projection.
/// The pooled grid has a fixed cell count, so the latent size does not depend
/// on the input grid size.
class ConvVisualEncoder {
public:
    ConvVisualEncoder() = default;
    explicit ConvVisualEncoder(const VisualEncoderConfig& config);

    void init(Rng& rng);

    // grids [B, H, W, C] -> [B, latent_dim]
    Var encode(Graph& g, Var grids) const;
    // Single H x W x C grid.
    Var encode_grid(Graph& g, const Tensor& grid) const;

    void check_grid(const Shape& hwc) const;

    const VisualEncoderConfig& config() const noexcept { return config_; }
    std::size_t latent_dim() const noexcept { return config_.latent_dim; }

    Tensor& kernel1() noexcept { return kernel1_; }
    Tensor& bias1() noexcept { return bias1_; }
    Tensor& kernel2() noexcept { return kernel2_; }
    Tensor& bias2() noexcept { return bias2_; }
    DenseLayer& projection() noexcept { return projection_; }

    void for_each_parameter(const std::string& prefix, const ParamVisitor& f);
    void for_each_parameter(const std::string& prefix, const ConstParamVisitor& f) const;

private:
    VisualEncoderConfig config_;
    Tensor kernel1_{{1, 1, 1, 1}};
    Tensor bias1_{{1}};
    Tensor kernel2_{{1, 1, 1, 1}};
    Tensor bias2_{{1}};
    DenseLayer projection_;
};

/// Visual encoder for publications that carry a precomputed feature vector
/// instead of a grid.
class FeatureVisualEncoder {
public:
    FeatureVisualEncoder() = default;
    FeatureVisualEncoder(std::size_t feature_dim, std::size_t latent_dim);

    void init(Rng& rng) { projection_.init_glorot(rng); }
    Var encode(Graph& g, Var features) const { return projection_.forward(g, features); }

    std::size_t feature_dim() const noexcept { return projection_.in_dim(); }
    std::size_t latent_dim() const noexcept { return projection_.out_dim(); }

    void for_each_parameter(const std::string& prefix, const ParamVisitor& f) {
        projection_.for_each_parameter(prefix + "projection.", f);
    }
    void for_each_parameter(const std::string& prefix, const ConstParamVisitor& f) const {
        projection_.for_each_parameter(prefix + "projection.", f);
    }

private:
    DenseLayer projection_;
};

}  // namespace fuselab
