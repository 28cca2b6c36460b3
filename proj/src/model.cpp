#include "fuselab/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>

#include "fuselab/errors.hpp"
#include "fuselab/ops.hpp"
#include "fuselab/random.hpp"

namespace fuselab {

std::string to_string(InputMode mode) {
    switch (mode) {
        case InputMode::text: return "text";
        case InputMode::visual: return "visual";
        case InputMode::multimodal: return "text+visual";
    }
    return "text+visual";
}

InputMode input_mode_from_string(const std::string& name) {
    if (name == "text") return InputMode::text;
    if (name == "visual") return InputMode::visual;
    if (name == "text+visual" || name == "multimodal") return InputMode::multimodal;
    throw ConfigError("unknown input mode '" + name + "' (text, visual, text+visual)");
}

// ---- ModelConfig ----

void ModelConfig::validate() const {
    if (latent_dim == 0 || embed_dim == 0 || hidden_dim == 0) throw ConfigError("model dimensions must be positive");
    if (channels == 0 || conv1_channels == 0 || conv2_channels == 0 || pool_cells == 0)
        throw ConfigError("visual encoder dimensions must be positive");
    const bool unimodal = inputs != InputMode::multimodal;
    if (unimodal && fusion.kind != FusionKind::none)
        throw ConfigError("a " + to_string(inputs) + "-only model takes fusion 'none'");
    if (!unimodal && fusion.kind == FusionKind::none)
        throw ConfigError("a multimodal model needs a fusion mechanism (concat, auto or gan)");
    if (fusion.latent_dim != latent_dim && fusion.latent_dim != FusionConfig{}.latent_dim)
        throw ConfigError("fusion latent_dim must follow the model latent_dim");
    if (tuple_enabled() && !uses_text()) throw ConfigError("the entity tuple needs the text modality");
}

FusionConfig ModelConfig::resolved_fusion() const {
    FusionConfig f = fusion;
    f.latent_dim = latent_dim;
    if (inputs == InputMode::text) f.unimodal = Modality::text;
    if (inputs == InputMode::visual) f.unimodal = Modality::visual;
    return f;
}

// ---- Vocabulary ----

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{"[oov]", "[empty]"}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.size() < 2 || tokens_[oov] != "[oov]" || tokens_[empty] != "[empty]")
        throw FormatError("vocabulary must start with [oov] and [empty]");
    for (std::size_t i = 0; i < tokens_.size(); ++i)
        if (!index_.emplace(tokens_[i], i).second) throw FormatError("duplicate vocabulary token '" + tokens_[i] + "'");
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& documents, std::size_t min_count) {
    std::unordered_map<std::string, std::size_t> counts;
    std::vector<std::string> order;
    for (const auto& doc : documents)
        for (const auto& t : doc)
            if (counts[t]++ == 0) order.push_back(t);
    std::vector<std::string> tokens{"[oov]", "[empty]"};
    for (const auto& t : order)
        if (counts[t] >= min_count && t != "[oov]" && t != "[empty]") tokens.push_back(t);
    return Vocabulary(std::move(tokens));
}

std::size_t Vocabulary::id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? oov : it->second;
}

std::vector<std::size_t> Vocabulary::encode(const std::vector<std::string>& document) const {
    if (document.empty()) return {empty};
    std::vector<std::size_t> ids;
    ids.reserve(document.size());
    for (const auto& t : document) ids.push_back(id(t));
    return ids;
}

// ---- TextPipeline ----

TextPipeline::TextPipeline(Lexicon lexicon, PosLexicon pos) : lexicon_(std::move(lexicon)), pos_(std::move(pos)) {}

TextPipeline TextPipeline::load(const std::filesystem::path& dir) {
    return TextPipeline(Lexicon::load_dir(dir), PosLexicon::load(dir / "pos.tsv"));
}

std::vector<std::string> TextPipeline::tokens(const Publication& p, bool use_caption) const {
    std::vector<std::string> out;
    if (p.text) out = normalize(*p.text, lexicon_).surfaces();
    if (use_caption && p.caption) {
        auto cap = normalize(*p.caption, lexicon_).surfaces();
        out.insert(out.end(), cap.begin(), cap.end());
    }
    return out;
}

std::vector<std::string> TextPipeline::tuple_words(const Publication& p) const {
    if (!p.text) return {};
    return extract_entity_tuple(normalize(*p.text, lexicon_), pos_).present();
}

// ---- FusionModel ----

FusionModel::FusionModel(const ModelConfig& config, Vocabulary vocabulary, LabelSpace labels)
    : config_(config), vocab_(std::move(vocabulary)), labels_(std::move(labels)) {
    config_.validate();
    if (labels_.size() < 2) throw ConfigError("the label space needs at least 2 classes");
    config_.fusion = config_.resolved_fusion();
    const std::size_t d = config_.latent_dim;
    if (config_.uses_text())
        text_ = RecurrentTextEncoder(TextEncoderConfig{vocab_.size(), config_.embed_dim, config_.hidden_dim, d});
    if (config_.uses_visual()) {
        if (config_.visual_features > 0) {
            features_ = FeatureVisualEncoder(config_.visual_features, d);
        } else {
            visual_ = ConvVisualEncoder(VisualEncoderConfig{config_.channels, config_.conv1_channels,
                                                            config_.conv2_channels, config_.pool_cells, d,
                                                            config_.max_grid});
        }
    }
    fusion_ = Fusion(config_.fusion);
    std::size_t head_in = fusion_.fuse_dim();
    if (config_.tuple_enabled()) head_in += config_.embed_dim;
    head_in += config_.entity_feature_dim;
    classifier_ = DenseLayer(head_in, labels_.size(), Activation::identity);
}

void FusionModel::init(std::uint64_t seed) {
    if (config_.uses_text()) {
        Rng r = make_rng(seed, 10);
        text_.init(r);
    }
    if (config_.uses_visual()) {
        Rng r = make_rng(seed, 11);
        if (config_.visual_features > 0) features_.init(r);
        else visual_.init(r);
    }
    Rng rf = make_rng(seed, 12);
    fusion_.init(rf);
    Rng rc = make_rng(seed, 13);
    classifier_.init_glorot(rc);
}

PreparedSample FusionModel::prepare(const Publication& p, const TextPipeline& text) const {
    PreparedSample s;
    s.label = p.label;
    const std::string who = p.id.empty() ? std::string("publication") : "publication '" + p.id + "'";
    if (config_.uses_text()) {
        if (!p.text && !(config_.use_caption && p.caption))
            throw InputError(who + " has no text but the model reads text");
        s.tokens = vocab_.encode(text.tokens(p, config_.use_caption));
        if (config_.tuple_enabled()) {
            const auto words = text.tuple_words(p);
            s.tuple = vocab_.encode(words);
        }
    }
    if (config_.uses_visual()) {
        if (!p.visual) throw InputError(who + " has no visual input but the model reads it");
        if (config_.visual_features > 0) {
            if (p.visual->rank() != 1 || p.visual->numel() != config_.visual_features)
                throw InputError(who + " visual feature vector must have " + std::to_string(config_.visual_features) +
                                 " values, got shape " + shape_string(p.visual->shape()));
        } else {
            if (p.visual->rank() != 3) throw InputError(who + " visual input must be an H x W x C grid");
            visual_.check_grid(p.visual->shape());
        }
        s.visual = *p.visual;
    }
    if (config_.entity_feature_dim > 0) {
        if (!p.entity_features || p.entity_features->size() != config_.entity_feature_dim)
            throw InputError(who + " needs " + std::to_string(config_.entity_feature_dim) + " entity features");
        s.entity = Tensor::vector(*p.entity_features);
    }
    return s;
}

std::vector<PreparedSample> FusionModel::prepare(const Dataset& data, const TextPipeline& text) const {
    if (data.labels.names() != labels_.names()) throw ConfigError("dataset label space does not match the model's");
    std::vector<PreparedSample> out;
    out.reserve(data.size());
    for (const auto& p : data.items) out.push_back(prepare(p, text));
    return out;
}

namespace {

// Encodes rows grouped by a key, then restores batch order.
template <class Key, class KeyFn, class EncodeFn>
Var encode_grouped(std::span<const PreparedSample* const> batch, KeyFn key_of, EncodeFn encode_group) {
    std::map<Key, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < batch.size(); ++i) groups[key_of(*batch[i])].push_back(i);
    if (groups.size() == 1) return encode_group(groups.begin()->second);
    std::vector<Var> parts;
    std::vector<std::size_t> position(batch.size());
    std::size_t row = 0;
    for (const auto& [key, members] : groups) {
        parts.push_back(encode_group(members));
        for (std::size_t m : members) position[m] = row++;
    }
    Var stacked = concat(parts, 0);
    return gather_rows(stacked, position);
}

}  // namespace

Latents FusionModel::encode(Graph& g, std::span<const PreparedSample* const> batch) const {
    if (batch.empty()) throw InputError("empty batch");
    Latents z;
    if (config_.uses_text()) {
        z.text = encode_grouped<std::size_t>(
            batch, [](const PreparedSample& s) { return s.tokens.size(); },
            [&](const std::vector<std::size_t>& members) {
                std::vector<std::vector<std::size_t>> seqs;
                seqs.reserve(members.size());
                for (std::size_t m : members) seqs.push_back(batch[m]->tokens);
                return text_.encode(g, seqs).latent;
            });
    }
    if (config_.uses_visual()) {
        for (const PreparedSample* s : batch)
            if (!s->visual) throw InputError("sample without visual input");
        if (config_.visual_features > 0) {
            const std::size_t f = config_.visual_features;
            Tensor x({batch.size(), f});
            for (std::size_t i = 0; i < batch.size(); ++i)
                std::copy(batch[i]->visual->data().begin(), batch[i]->visual->data().end(), x.data().begin() + i * f);
            z.visual = features_.encode(g, g.constant(std::move(x)));
        } else {
            z.visual = encode_grouped<Shape>(
                batch, [](const PreparedSample& s) { return s.visual->shape(); },
                [&](const std::vector<std::size_t>& members) {
                    const Shape& hwc = batch[members.front()]->visual->shape();
                    const std::size_t n = shape_size(hwc);
                    Tensor x({members.size(), hwc[0], hwc[1], hwc[2]});
                    for (std::size_t k = 0; k < members.size(); ++k) {
                        const auto src = batch[members[k]]->visual->data();
                        std::copy(src.begin(), src.end(), x.data().begin() + k * n);
                    }
                    return visual_.encode(g, g.constant(std::move(x)));
                });
        }
    }
    return z;
}

ModelOutput FusionModel::head(Graph& g, std::span<const PreparedSample* const> batch, const Latents& latents,
                              Rng* noise) const {
    ModelOutput out;
    out.latents = latents;
    out.fusion = fusion_.fuse(g, latents.visual, latents.text, noise);
    std::vector<Var> features{out.fusion.fused};
    if (config_.tuple_enabled()) {
        // Mean of the tuple-word embeddings, one row per sample.
        std::vector<std::size_t> ids;
        std::vector<std::size_t> offsets;
        for (const PreparedSample* s : batch) {
            offsets.push_back(ids.size());
            const auto& t = s->tuple.empty() ? std::vector<std::size_t>{Vocabulary::empty} : s->tuple;
            ids.insert(ids.end(), t.begin(), t.end());
        }
        offsets.push_back(ids.size());
        Tensor pool({batch.size(), ids.size()});
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const double w = 1.0 / static_cast<double>(offsets[b + 1] - offsets[b]);
            for (std::size_t k = offsets[b]; k < offsets[b + 1]; ++k) pool.at(b, k) = w;
        }
        Var rows = text_.embedding().lookup(g, ids);
        features.push_back(matmul(g.constant(std::move(pool)), rows));
    }
    if (config_.entity_feature_dim > 0) {
        const std::size_t f = config_.entity_feature_dim;
        Tensor x({batch.size(), f});
        for (std::size_t i = 0; i < batch.size(); ++i) {
            if (!batch[i]->entity) throw InputError("sample without entity features");
            std::copy(batch[i]->entity->data().begin(), batch[i]->entity->data().end(), x.data().begin() + i * f);
        }
        features.push_back(g.constant(std::move(x)));
    }
    Var joint = features.size() == 1 ? features.front() : concat(features, 1);
    out.logits = classifier_.forward(g, joint);
    out.probs = softmax(out.logits);
    return out;
}

ModelOutput FusionModel::forward(Graph& g, std::span<const PreparedSample* const> batch, Rng* noise) const {
    return head(g, batch, encode(g, batch), noise);
}

namespace {

template <class M, class F>
void visit_model(M& m, const F& f) {
    const ModelConfig& c = m.config();
    if (c.uses_text()) m.text_encoder().for_each_parameter("text.", f);
    if (c.uses_visual()) {
        if (c.visual_features > 0) m.feature_encoder().for_each_parameter("visual.", f);
        else m.visual_encoder().for_each_parameter("visual.", f);
    }
    m.fusion().for_each_parameter("fusion.", f);
    m.classifier().for_each_parameter("classifier.", f);
}

}  // namespace

void FusionModel::for_each_parameter(const ParamVisitor& f) { visit_model(*this, f); }

void FusionModel::for_each_parameter(const ConstParamVisitor& f) const {
    visit_model(const_cast<FusionModel&>(*this), [&f](const std::string& name, const Tensor& t) { f(name, t); });
}

std::vector<std::pair<std::string, Tensor*>> FusionModel::parameters() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for_each_parameter([&out](const std::string& name, Tensor& t) { out.emplace_back(name, &t); });
    return out;
}

// ---- losses and prediction ----

Var cross_entropy(Var targets, Var probs) {
    if (targets.shape() != probs.shape())
        throw DimensionError("cross_entropy: targets " + shape_string(targets.shape()) + " and predictions " +
                             shape_string(probs.shape()) + " differ");
    const double rows = probs.value().rank() == 2 ? static_cast<double>(probs.dim(0)) : 1.0;
    return scale(sum(mul(targets, log(probs))), -1.0 / rows);
}

double cross_entropy(std::span<const double> targets, std::span<const double> probs) {
    if (targets.size() != probs.size())
        throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets vs " +
                             std::to_string(probs.size()) + " predictions");
    double j = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (probs[i] < 0.0) throw DomainError("cross_entropy: negative probability");
        if (targets[i] != 0.0) j -= targets[i] * std::log(std::max(probs[i], kLogEpsilon));
    }
    return j;
}

Tensor one_hot(std::span<const std::size_t> labels, std::size_t classes, std::span<const double> class_weights) {
    if (!class_weights.empty() && class_weights.size() != classes)
        throw ConfigError("class_weights needs one weight per class");
    Tensor t({labels.size(), classes});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= classes) throw InputError("label index out of range");
        t.at(i, labels[i]) = class_weights.empty() ? 1.0 : class_weights[labels[i]];
    }
    return t;
}

std::size_t argmax(std::span<const double> values) {
    if (values.empty()) throw InputError("argmax of an empty distribution");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

std::vector<Prediction> predict(const FusionModel& model, std::span<const PreparedSample> samples, std::size_t threads,
                                std::size_t batch_size) {
    if (batch_size == 0) throw ConfigError("batch size must be at least 1");
    std::vector<Prediction> out(samples.size());
    const std::size_t classes = model.labels().size();
    const std::size_t batches = (samples.size() + batch_size - 1) / batch_size;
    auto run = [&](std::size_t worker, std::size_t workers) {
        for (std::size_t b = worker; b < batches; b += workers) {
            const std::size_t lo = b * batch_size, hi = std::min(samples.size(), lo + batch_size);
            std::vector<const PreparedSample*> batch;
            for (std::size_t i = lo; i < hi; ++i) batch.push_back(&samples[i]);
            Graph g;
            const ModelOutput o = model.forward(g, batch, nullptr);
            const auto probs = o.probs.value().data();
            for (std::size_t i = lo; i < hi; ++i) {
                auto row = probs.subspan((i - lo) * classes, classes);
                out[i].distribution.assign(row.begin(), row.end());
                out[i].label = argmax(row);
            }
        }
    };
    threads = std::max<std::size_t>(1, std::min(threads, batches));
    if (threads == 1) {
        run(0, 1);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(threads);
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                try {
                    run(t, threads);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    return out;
}

Prediction predict(const FusionModel& model, const TextPipeline& text, const Publication& p) {
    const PreparedSample s = model.prepare(p, text);
    return predict(model, std::span<const PreparedSample>(&s, 1)).front();
}

}  // namespace fuselab
