#include "fuselab/layers.hpp"

#include "fuselab/errors.hpp"
#include "fuselab/ops.hpp"

namespace fuselab {

Var activate(Var x, Activation act) {
    switch (act) {
        case Activation::identity: return x;
        case Activation::sigmoid: return sigmoid(x);
        case Activation::tanh: return tanh(x);
        case Activation::relu: return relu(x);
        case Activation::softmax: return softmax(x);
    }
    return x;
}

std::string to_string(Activation act) {
    switch (act) {
        case Activation::identity: return "identity";
        case Activation::sigmoid: return "sigmoid";
        case Activation::tanh: return "tanh";
        case Activation::relu: return "relu";
        case Activation::softmax: return "softmax";
    }
    return "identity";
}

Activation activation_from_string(const std::string& name) {
    if (name == "identity") return Activation::identity;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "tanh") return Activation::tanh;
    if (name == "relu") return Activation::relu;
    if (name == "softmax") return Activation::softmax;
    throw ConfigError("unknown activation '" + name + "'");
}

// ---- DenseLayer ----

DenseLayer::DenseLayer(std::size_t in, std::size_t out, Activation act)
    : weight_({out, in}), bias_({out}), act_(act) {}

void DenseLayer::init_glorot(Rng& rng) {
    fill_glorot(weight_, in_dim(), out_dim(), rng);
    for (double& b : bias_.data()) b = 0.0;
}

Var DenseLayer::forward(Graph& g, Var x) const {
    if (x.value().rank() != 2 || x.dim(1) != in_dim())
        throw DimensionError("dense layer expects [B, " + std::to_string(in_dim()) + "], got " +
                             shape_string(x.shape()));
    return activate(linear(x, g.param(weight_), g.param(bias_)), act_);
}

Tensor DenseLayer::apply(const Tensor& x) const {
    if (x.numel() != in_dim())
        throw DimensionError("dense layer expects " + std::to_string(in_dim()) + " inputs, got shape " +
                             shape_string(x.shape()));
    Graph g;
    Var y = forward(g, g.constant(x.reshaped({1, in_dim()})));
    return y.value().reshaped({out_dim()});
}

namespace {

template <class Layer, class F>
void visit_dense(Layer& layer, const std::string& prefix, const F& f) {
    f(prefix + "weight", layer.weight());
    f(prefix + "bias", layer.bias());
}

}  // namespace

void DenseLayer::for_each_parameter(const std::string& prefix, const ParamVisitor& f) { visit_dense(*this, prefix, f); }
void DenseLayer::for_each_parameter(const std::string& prefix, const ConstParamVisitor& f) const {
    visit_dense(*this, prefix, f);
}

// ---- EmbeddingTable ----

EmbeddingTable::EmbeddingTable(std::size_t vocab, std::size_t dim, std::size_t oov_index)
    : matrix_({vocab, dim}), oov_(oov_index) {
    if (oov_index >= vocab) throw ConfigError("OOV index outside the embedding table");
}

void EmbeddingTable::init_uniform(double bound, Rng& rng) { fill_uniform(matrix_, -bound, bound, rng); }

void EmbeddingTable::init_normal(double stddev, Rng& rng) { fill_normal(matrix_, 0.0, stddev, rng); }

Var EmbeddingTable::lookup(Graph& g, std::span<const std::size_t> ids) const {
    std::vector<std::size_t> rows(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) rows[i] = resolve(ids[i]);
    return gather_rows(g.param(matrix_), rows);
}

void EmbeddingTable::for_each_parameter(const std::string& prefix, const ParamVisitor& f) {
    f(prefix + "matrix", matrix_);
}
void EmbeddingTable::for_each_parameter(const std::string& prefix, const ConstParamVisitor& f) const {
    f(prefix + "matrix", matrix_);
}

// ---- RecurrentTextEncoder ----

RecurrentTextEncoder::RecurrentTextEncoder(const TextEncoderConfig& config)
    : config_(config),
      embedding_(config.vocab, config.embed_dim, 0),
      fwd_{Tensor({4 * config.hidden_dim, config.embed_dim + config.hidden_dim}), Tensor({4 * config.hidden_dim})},
      bwd_{Tensor({4 * config.hidden_dim, config.embed_dim + config.hidden_dim}), Tensor({4 * config.hidden_dim})},
      query_({2 * config.hidden_dim, 1}),
      projection_(2 * config.hidden_dim, config.latent_dim, Activation::tanh) {
    if (config.vocab == 0 || config.embed_dim == 0 || config.hidden_dim == 0 || config.latent_dim == 0)
        throw ConfigError("text encoder dimensions must be positive");
}

void RecurrentTextEncoder::init(Rng& rng) {
    constexpr double bound = 0.08;
    embedding_.init_normal(1.0, rng);
    const std::size_t h = config_.hidden_dim;
    for (Direction* dir : {&fwd_, &bwd_}) {
        fill_uniform(dir->weight, -bound, bound, rng);
        fill_uniform(dir->bias, -bound, bound, rng);
        for (std::size_t i = h; i < 2 * h; ++i) dir->bias[i] = 1.0;
    }
    fill_uniform(query_, -bound, bound, rng);
    projection_.init_glorot(rng);
}

std::vector<Var> RecurrentTextEncoder::run_direction(Graph& g, const Direction& dir, std::span<const Var> inputs,
                                                     bool reverse) const {
    const std::size_t batch = inputs.front().dim(0);
    const std::size_t h = config_.hidden_dim;
    const std::size_t steps = inputs.size();
    Var w = g.param(dir.weight);
    Var b = g.param(dir.bias);
    Var hidden = g.constant(Tensor({batch, h}));
    Var cell = g.constant(Tensor({batch, h}));
    std::vector<Var> states(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const std::size_t t = reverse ? steps - 1 - k : k;
        Var z = linear(concat({inputs[t], hidden}, 1), w, b);
        Var in_gate = sigmoid(slice(z, 1, 0, h));
        Var forget_gate = sigmoid(slice(z, 1, h, 2 * h));
        Var out_gate = sigmoid(slice(z, 1, 2 * h, 3 * h));
        Var candidate = tanh(slice(z, 1, 3 * h, 4 * h));
        cell = add(mul(forget_gate, cell), mul(in_gate, candidate));
        hidden = mul(out_gate, tanh(cell));
        states[t] = hidden;
    }
    return states;
}

EncodedText RecurrentTextEncoder::encode(Graph& g, std::span<const std::vector<std::size_t>> batch) const {
    if (batch.empty()) throw InputError("text encoder: empty batch");
    const std::size_t steps = batch.front().size();
    if (steps == 0) throw InputError("text encoder: empty token sequence (substitute the [empty] token)");
    for (const auto& seq : batch)
        if (seq.size() != steps) throw DimensionError("text encoder: sequences in a batch must share one length");

    std::vector<Var> inputs(steps);
    std::vector<std::size_t> ids(batch.size());
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t r = 0; r < batch.size(); ++r) ids[r] = batch[r][t];
        inputs[t] = embedding_.lookup(g, ids);
    }
    const auto fwd = run_direction(g, fwd_, inputs, false);
    const auto bwd = run_direction(g, bwd_, inputs, true);

    Var query = g.param(query_);
    std::vector<Var> states(steps), scores(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        states[t] = concat({fwd[t], bwd[t]}, 1);
        scores[t] = matmul(states[t], query);
    }
    Var attention = softmax(concat(scores, 1));
    Var context = mul_column(states[0], slice(attention, 1, 0, 1));
    for (std::size_t t = 1; t < steps; ++t) context = add(context, mul_column(states[t], slice(attention, 1, t, t + 1)));
    return {projection_.forward(g, context), attention};
}

EncodedText RecurrentTextEncoder::encode(Graph& g, std::span<const std::size_t> tokens) const {
    std::vector<std::vector<std::size_t>> batch{std::vector<std::size_t>(tokens.begin(), tokens.end())};
    return encode(g, batch);
}

namespace {

template <class Enc, class F>
void visit_text(Enc& enc, const std::string& prefix, const F& f) {
    enc.embedding().for_each_parameter(prefix + "embedding.", f);
    f(prefix + "forward.weight", enc.forward_direction().weight);
    f(prefix + "forward.bias", enc.forward_direction().bias);
    f(prefix + "backward.weight", enc.backward_direction().weight);
    f(prefix + "backward.bias", enc.backward_direction().bias);
    f(prefix + "attention.query", enc.query());
    enc.projection().for_each_parameter(prefix + "projection.", f);
}

}  // namespace

void RecurrentTextEncoder::for_each_parameter(const std::string& prefix, const ParamVisitor& f) {
    visit_text(*this, prefix, f);
}
void RecurrentTextEncoder::for_each_parameter(const std::string& prefix, const ConstParamVisitor& f) const {
    visit_text(const_cast<RecurrentTextEncoder&>(*this), prefix,
               [&f](const std::string& name, const Tensor& t) { f(name, t); });
}

// ---- ConvVisualEncoder ----

ConvVisualEncoder::ConvVisualEncoder(const VisualEncoderConfig& config)
    : config_(config),
      kernel1_({3, 3, config.channels, config.conv1_channels}),
      bias1_({config.conv1_channels}),
      kernel2_({3, 3, config.conv1_channels, config.conv2_channels}),
      bias2_({config.conv2_channels}),
      projection_(config.conv2_channels * config.pool_cells * config.pool_cells, config.latent_dim,
                  Activation::tanh) {
    if (config.channels == 0 || config.conv1_channels == 0 || config.conv2_channels == 0 || config.pool_cells == 0 ||
        config.latent_dim == 0)
        throw ConfigError("visual encoder dimensions must be positive");
}

void ConvVisualEncoder::init(Rng& rng) {
    fill_glorot(kernel1_, 9 * config_.channels, 9 * config_.conv1_channels, rng);
    fill_glorot(kernel2_, 9 * config_.conv1_channels, 9 * config_.conv2_channels, rng);
    for (double& b : bias1_.data()) b = 0.0;
    for (double& b : bias2_.data()) b = 0.0;
    projection_.init_glorot(rng);
}

void ConvVisualEncoder::check_grid(const Shape& hwc) const {
    if (hwc.size() != 3) throw DimensionError("visual grid must be H x W x C, got " + shape_string(hwc));
    if (hwc[2] != config_.channels)
        throw DimensionError("visual grid has " + std::to_string(hwc[2]) + " channels, encoder expects " +
                             std::to_string(config_.channels));
    const std::size_t lo = config_.min_grid();
    if (hwc[0] < lo || hwc[1] < lo)
        throw DimensionError("visual grid " + shape_string(hwc) + " is smaller than the receptive field (" +
                             std::to_string(lo) + "x" + std::to_string(lo) + ")");
    if (hwc[0] > config_.max_grid || hwc[1] > config_.max_grid)
        throw DimensionError("visual grid " + shape_string(hwc) + " exceeds the admissible size " +
                             std::to_string(config_.max_grid));
}

Var ConvVisualEncoder::encode(Graph& g, Var grids) const {
    const Shape s = grids.shape();
    if (s.size() != 4) throw DimensionError("visual encoder expects [B, H, W, C], got " + shape_string(s));
    check_grid({s[1], s[2], s[3]});
    Var h1 = relu(conv2d(grids, g.param(kernel1_), g.param(bias1_)));
    Var h2 = relu(conv2d(h1, g.param(kernel2_), g.param(bias2_)));
    Var pooled = adaptive_max_pool(h2, config_.pool_cells);
    const std::size_t batch = s[0];
    return projection_.forward(g, reshape(pooled, {batch, pooled.numel() / batch}));
}

Var ConvVisualEncoder::encode_grid(Graph& g, const Tensor& grid) const {
    check_grid(grid.shape());
    Shape s{1};
    s.insert(s.end(), grid.shape().begin(), grid.shape().end());
    return encode(g, g.constant(grid.reshaped(s)));
}

namespace {

template <class Enc, class F>
void visit_visual(Enc& enc, const std::string& prefix, const F& f) {
    f(prefix + "conv1.kernel", enc.kernel1());
    f(prefix + "conv1.bias", enc.bias1());
    f(prefix + "conv2.kernel", enc.kernel2());
    f(prefix + "conv2.bias", enc.bias2());
    enc.projection().for_each_parameter(prefix + "projection.", f);
}

}  // namespace

void ConvVisualEncoder::for_each_parameter(const std::string& prefix, const ParamVisitor& f) {
    visit_visual(*this, prefix, f);
}
void ConvVisualEncoder::for_each_parameter(const std::string& prefix, const ConstParamVisitor& f) const {
    visit_visual(const_cast<ConvVisualEncoder&>(*this), prefix,
                 [&f](const std::string& name, const Tensor& t) { f(name, t); });
}

FeatureVisualEncoder::FeatureVisualEncoder(std::size_t feature_dim, std::size_t latent_dim)
    : projection_(feature_dim, latent_dim, Activation::tanh) {}

}  // namespace fuselab
