#include "fuselab/gradsuite.hpp"

#include <functional>
#include <random>

#include "fuselab/fusion.hpp"
#include "fuselab/layers.hpp"
#include "fuselab/model.hpp"
#include "fuselab/ops.hpp"
#include "fuselab/random.hpp"
#include "fuselab/trainer.hpp"

namespace fuselab {

namespace {

class Suite {
public:
    Suite(double tol, std::uint64_t seed) : tol_(tol), rng_(make_rng(seed, 0)) {}

    Tensor random(Shape shape, double lo = -1.0, double hi = 1.0) {
        Tensor t(std::move(shape));
        fill_uniform(t, lo, hi, rng_);
        return t;
    }

    // Weighted sum of f's output with fixed random weights, so every output
    // coordinate reaches the scalar.
    void unary(const std::string& name, Tensor point, const std::function<Var(Var)>& f) {
        Tensor weights;
        {
            Graph g;
            weights = random(f(g.constant(point)).shape());
        }
        const auto fn = [&](Graph& g, Var x) { return sum(mul(f(x), g.constant(weights))); };
        entries_.push_back({name, grad_check(fn, point, 1e-5, tol_)});
    }

    void params(const std::string& name, std::vector<Tensor*> ps, const std::function<Var(Graph&)>& f) {
        entries_.push_back({name, grad_check_params(f, ps, 1e-5, tol_)});
        for (Tensor* p : ps) {
            p->set_requires_grad(false);
            p->clear_grad();
        }
    }

    // f(a, b) checked in both arguments at once.
    void binary(const std::string& name, Tensor a, Tensor b, const std::function<Var(Var, Var)>& f) {
        Tensor weights;
        {
            Graph g;
            weights = random(f(g.constant(a), g.constant(b)).shape());
        }
        params(name, {&a, &b}, [&](Graph& g) { return sum(mul(f(g.param(a), g.param(b)), g.constant(weights))); });
    }

    std::vector<SuiteEntry> take() { return std::move(entries_); }
    Rng& rng() { return rng_; }

private:
    double tol_;
    Rng rng_;
    std::vector<SuiteEntry> entries_;
};

std::vector<Tensor*> layer_params(auto& layer) {
    std::vector<Tensor*> out;
    layer.for_each_parameter("", [&out](const std::string&, Tensor& t) { out.push_back(&t); });
    return out;
}

void primitive_ops(Suite& s) {
    s.binary("op.add", s.random({3, 4}), s.random({3, 4}), [](Var a, Var b) { return add(a, b); });
    s.binary("op.add.scalar", s.random({3, 4}), s.random({1}), [](Var a, Var b) { return add(a, b); });
    s.binary("op.sub", s.random({3, 4}), s.random({3, 4}), [](Var a, Var b) { return sub(a, b); });
    s.binary("op.mul", s.random({3, 4}), s.random({3, 4}), [](Var a, Var b) { return mul(a, b); });
    s.binary("op.div", s.random({3, 4}), s.random({3, 4}, 0.5, 2.0), [](Var a, Var b) { return div(a, b); });
    s.unary("op.scale", s.random({2, 3}), [](Var x) { return scale(x, -1.7); });
    s.unary("op.shift", s.random({2, 3}), [](Var x) { return shift(x, 0.3); });
    s.unary("op.neg", s.random({2, 3}), [](Var x) { return neg(x); });
    s.unary("op.one_minus", s.random({2, 3}), [](Var x) { return one_minus(x); });
    s.binary("op.matmul", s.random({3, 4}), s.random({4, 2}), [](Var a, Var b) { return matmul(a, b); });
    {
        Tensor x = s.random({3, 4}), w = s.random({2, 4}), b = s.random({2});
        Tensor weights = s.random({3, 2});
        s.params("op.linear", {&x, &w, &b},
                 [&](Graph& g) { return sum(mul(linear(g.param(x), g.param(w), g.param(b)), g.constant(weights))); });
    }
    s.binary("op.add_row", s.random({3, 4}), s.random({4}), [](Var a, Var b) { return add_row(a, b); });
    s.binary("op.mul_column", s.random({3, 4}), s.random({3, 1}), [](Var a, Var b) { return mul_column(a, b); });
    s.binary("op.concat.axis0", s.random({2, 3}), s.random({1, 3}), [](Var a, Var b) { return concat({a, b}, 0); });
    s.binary("op.concat.axis1", s.random({2, 3}), s.random({2, 2}), [](Var a, Var b) { return concat({a, b}, 1); });
    s.unary("op.slice", s.random({3, 5}), [](Var x) { return slice(x, 1, 1, 4); });
    s.unary("op.reshape", s.random({2, 6}), [](Var x) { return reshape(x, {3, 4}); });
    s.unary("op.gather_rows", s.random({4, 3}), [](Var x) {
        const std::vector<std::size_t> rows{2, 0, 2, 3};
        return gather_rows(x, rows);
    });
    s.unary("op.sum", s.random({3, 4}), [](Var x) { return sum(x); });
    s.unary("op.mean", s.random({3, 4}), [](Var x) { return mean(x); });
    s.unary("op.squared_norm", s.random({3, 4}), [](Var x) { return squared_norm(x); });
    s.unary("op.exp", s.random({3, 4}), [](Var x) { return exp(x); });
    s.unary("op.log", s.random({3, 4}, 0.2, 2.0), [](Var x) { return log(x); });
    s.unary("op.tanh", s.random({3, 4}, -2.0, 2.0), [](Var x) { return tanh(x); });
    s.unary("op.sigmoid", s.random({3, 4}, -3.0, 3.0), [](Var x) { return sigmoid(x); });
    s.unary("op.relu", s.random({3, 4}), [](Var x) { return relu(x); });
    s.unary("op.clamp", s.random({3, 4}, -2.0, 2.0), [](Var x) { return clamp(x, -1.0, 1.0); });
    s.unary("op.softmax", s.random({3, 4}, -2.0, 2.0), [](Var x) { return softmax(x); });
    s.binary("op.conv2d.input_kernel", s.random({2, 5, 6, 2}), s.random({3, 3, 2, 3}), [](Var x, Var k) {
        Graph& g = *x.graph;
        return conv2d(x, k, g.constant(Tensor({3}, std::vector<double>{0.1, -0.2, 0.05})));
    });
    {
        Tensor x = s.random({1, 4, 4, 2}), k = s.random({3, 3, 2, 2}), b = s.random({2});
        Tensor weights = s.random({1, 2, 2, 2});
        s.params("op.conv2d.bias", {&b},
                 [&](Graph& g) { return sum(mul(conv2d(g.param(x), g.param(k), g.param(b)), g.constant(weights))); });
    }
    s.unary("op.adaptive_max_pool", s.random({2, 5, 4, 3}), [](Var x) { return adaptive_max_pool(x, 2); });
}

void layers(Suite& s) {
    for (Activation act : {Activation::identity, Activation::sigmoid, Activation::tanh, Activation::relu,
                           Activation::softmax}) {
        DenseLayer layer(4, 3, act);
        layer.init_glorot(s.rng());
        fill_uniform(layer.bias(), -0.5, 0.5, s.rng());
        Tensor x = s.random({5, 4});
        Tensor weights = s.random({5, 3});
        auto ps = layer_params(layer);
        ps.push_back(&x);
        s.params("layer.dense." + to_string(act), ps,
                 [&](Graph& g) { return sum(mul(layer.forward(g, g.param(x)), g.constant(weights))); });
    }
    {
        EmbeddingTable table(6, 4, 0);
        table.init_uniform(0.5, s.rng());
        Tensor weights = s.random({5, 4});
        const std::vector<std::size_t> ids{1, 3, 3, 9, 5};
        s.params("layer.embedding", layer_params(table),
                 [&](Graph& g) { return sum(mul(table.lookup(g, ids), g.constant(weights))); });
    }
    for (std::size_t length : {1, 5, 20}) {
        RecurrentTextEncoder enc(TextEncoderConfig{8, 3, 3, 4});
        enc.init(s.rng());
        // Spread the weights so the check sees non-trivial gate activity.
        fill_uniform(enc.forward_direction().weight, -0.5, 0.5, s.rng());
        fill_uniform(enc.backward_direction().weight, -0.5, 0.5, s.rng());
        fill_uniform(enc.query(), -0.5, 0.5, s.rng());
        std::vector<std::vector<std::size_t>> batch(2, std::vector<std::size_t>(length));
        std::uniform_int_distribution<std::size_t> token(0, 7);
        for (auto& seq : batch)
            for (auto& t : seq) t = token(s.rng());
        Tensor weights = s.random({2, 4});
        s.params("layer.text_encoder.len" + std::to_string(length), layer_params(enc),
                 [&](Graph& g) { return sum(mul(enc.encode(g, batch).latent, g.constant(weights))); });
    }
    {
        ConvVisualEncoder enc(VisualEncoderConfig{2, 3, 4, 2, 4, 64});
        enc.init(s.rng());
        fill_uniform(enc.bias1(), 0.0, 0.2, s.rng());
        fill_uniform(enc.bias2(), 0.0, 0.2, s.rng());
        Tensor grids = s.random({2, 7, 6, 2});
        Tensor weights = s.random({2, 4});
        auto ps = layer_params(enc);
        ps.push_back(&grids);
        s.params("layer.visual_encoder", ps,
                 [&](Graph& g) { return sum(mul(enc.encode(g, g.param(grids)), g.constant(weights))); });
    }
    {
        FeatureVisualEncoder enc(5, 4);
        enc.init(s.rng());
        Tensor x = s.random({3, 5});
        Tensor weights = s.random({3, 4});
        s.params("layer.feature_encoder", layer_params(enc),
                 [&](Graph& g) { return sum(mul(enc.encode(g, g.param(x)), g.constant(weights))); });
    }
}

void losses(Suite& s) {
    {
        Tensor z = s.random({3, 8}), zhat = s.random({3, 8});
        s.params("loss.auto_fusion", {&z, &zhat},
                 [&](Graph& g) { return auto_fusion_loss(g.param(z), g.param(zhat)); });
    }
    {
        GanFusionModule m(4, 2, 8);
        m.init(s.rng());
        Tensor real = s.random({5, 4}), source = s.random({5, 4});
        auto ps = layer_params(m);
        ps.push_back(&real);
        ps.push_back(&source);
        s.params("loss.gan_adv", ps, [&](Graph& g) {
            Rng noise = make_rng(11, 5);
            return gan_adv_loss(g, m, g.param(real), g.param(source), &noise).objective;
        });
        for (bool ns : {true, false}) {
            s.params(std::string("loss.generator.") + (ns ? "nonsaturating" : "saturating"), layer_params(m),
                     [&](Graph& g) {
                         Rng noise = make_rng(11, 6);
                         return generator_loss(m.discriminate(g, m.generate(g, g.param(source), &noise)), ns);
                     });
        }
    }
    {
        // 1-D toy: D(x) = sigmoid(w x) at w = 0.
        Tensor w({1, 1}, 0.0), b({1}, 0.0);
        Tensor real = s.random({6, 1}), fake = s.random({6, 1});
        s.params("loss.gan_adv.1d_w0", {&w}, [&](Graph& g) {
            Var d_real = sigmoid(linear(g.constant(real), g.param(w), g.param(b)));
            Var d_fake = sigmoid(linear(g.constant(fake), g.param(w), g.param(b)));
            return adversarial_objective(d_real, d_fake);
        });
    }
    {
        Tensor logits = s.random({4, 3}, -2.0, 2.0);
        const std::vector<std::size_t> labels{0, 2, 1, 2};
        const Tensor targets = one_hot(labels, 3);
        s.params("loss.cross_entropy", {&logits},
                 [&](Graph& g) { return cross_entropy(g.constant(targets), softmax(g.param(logits))); });
    }
}

void end_to_end(Suite& s) {
    const Vocabulary vocab({"[oov]", "[empty]", "red", "blue", "cat", "dog", "runs"});
    std::vector<PreparedSample> samples(3);
    const std::vector<std::vector<std::size_t>> texts{{2, 4, 6}, {3, 5}, {2, 5, 6}};
    for (std::size_t i = 0; i < samples.size(); ++i) {
        samples[i].tokens = texts[i];
        samples[i].tuple = {texts[i].front(), texts[i].back()};
        samples[i].visual = s.random({6, 6, 1});
        samples[i].label = i % 2;
    }
    std::vector<const PreparedSample*> batch;
    for (const auto& x : samples) batch.push_back(&x);

    struct Case {
        std::string name;
        InputMode inputs;
        FusionKind kind;
        bool tuple;
    };
    const std::vector<Case> cases{{"objective.text_only", InputMode::text, FusionKind::none, true},
                                  {"objective.visual_only", InputMode::visual, FusionKind::none, false},
                                  {"objective.concat", InputMode::multimodal, FusionKind::concat, false},
                                  {"objective.auto_fusion", InputMode::multimodal, FusionKind::autofusion, false},
                                  {"objective.gan_fusion", InputMode::multimodal, FusionKind::gan, false},
                                  {"objective.gan_fusion.detached", InputMode::multimodal, FusionKind::gan, false}};
    for (const auto& c : cases) {
        ModelConfig mc;
        mc.inputs = c.inputs;
        mc.latent_dim = 4;
        mc.embed_dim = 3;
        mc.hidden_dim = 3;
        mc.conv1_channels = 2;
        mc.conv2_channels = 3;
        mc.entity_tuple = c.tuple;
        mc.fusion.kind = c.kind;
        mc.fusion.latent_dim = 4;
        mc.fusion.concat_projection = c.kind == FusionKind::concat;
        FusionModel model(mc, vocab, LabelSpace({"no", "yes"}, LabelMode::binary));
        model.init(3);
        TrainConfig tc;
        tc.adv_to_encoders = c.name.find("detached") == std::string::npos;
        std::vector<Tensor*> ps;
        // With the adversarial flow cut at the encoders their gradient is
        // intentionally not the full derivative; check everything else.
        for (auto& [name, t] : model.parameters())
            if (tc.adv_to_encoders || !(name.starts_with("text.") || name.starts_with("visual.")))
                ps.push_back(t);
        s.params(c.name, ps, [&](Graph& g) {
            Rng noise = make_rng(5, 9);
            return training_objective(g, model, batch, tc, &noise).total;
        });
        if (const GanFusion* gan = model.fusion().gan()) {
            std::vector<Tensor*> dps;
            for (auto& [name, t] : model.parameters())
                if (is_discriminator_parameter(name)) dps.push_back(t);
            Tensor zt = s.random({3, 4}), zv = s.random({3, 4});
            if (c.name.find("detached") == std::string::npos)
                s.params("objective.discriminator", dps, [&](Graph& g) {
                    Rng noise = make_rng(5, 10);
                    return discriminator_objective(g, *gan, g.constant(zt), g.constant(zv), &noise);
                });
        }
    }
}

}  // namespace

std::vector<SuiteEntry> run_gradient_suite(double tol, std::uint64_t seed) {
    Suite s(tol, seed);
    primitive_ops(s);
    layers(s);
    losses(s);
    end_to_end(s);
    return s.take();
}

}  // namespace fuselab
