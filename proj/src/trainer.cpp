#include "fuselab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "fuselab/errors.hpp"
#include "fuselab/ops.hpp"

namespace fuselab {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind optimizer_from_string(const std::string& name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + name + "' (sgd, adam)");
}

double TrainConfig::resolved_learning_rate() const {
    return learning_rate.value_or(optimizer == OptimizerKind::sgd ? 1e-2 : 1e-3);
}

double TrainConfig::resolved_discriminator_learning_rate() const {
    return discriminator_learning_rate.value_or(resolved_learning_rate());
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (epochs < 1 && max_steps == 0) throw ConfigError("epochs must be at least 1");
    if (!(resolved_learning_rate() > 0.0) || !(resolved_discriminator_learning_rate() > 0.0))
        throw ConfigError("learning rates must be positive");
    if (k < 1) throw ConfigError("k must be at least 1");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be >= 0");
    for (double w : class_weights)
        if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("class weights must be finite and >= 0");
}

// ---- Optimizer ----

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, double beta1, double beta2, double epsilon)
    : kind_(kind), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

void Optimizer::step(std::span<Tensor* const> params) {
    for (Tensor* p : params) {
        if (!p->has_grad()) continue;
        auto grad = p->grad();
        auto data = p->data();
        if (kind_ == OptimizerKind::sgd) {
            for (std::size_t i = 0; i < data.size(); ++i) data[i] -= lr_ * grad[i];
        } else {
            Moments& s = state_[p];
            if (s.m.empty()) {
                s.m.assign(data.size(), 0.0);
                s.v.assign(data.size(), 0.0);
            }
            ++s.t;
            const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(s.t));
            const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(s.t));
            for (std::size_t i = 0; i < data.size(); ++i) {
                s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * grad[i];
                s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * grad[i] * grad[i];
                data[i] -= lr_ * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + eps_);
            }
        }
        p->clear_grad();
    }
}

double clip_gradient_norm(std::span<Tensor* const> params, double max_norm) {
    double sq = 0.0;
    for (const Tensor* p : params)
        for (double g : p->grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double f = max_norm / norm;
        for (const Tensor* p : params)
            for (double& g : p->grad_mut()) g *= f;
    }
    return norm;
}

// ---- objectives ----

Objective training_objective(Graph& g, const FusionModel& model, std::span<const PreparedSample* const> batch,
                             const TrainConfig& config, Rng* noise) {
    std::vector<std::size_t> labels;
    labels.reserve(batch.size());
    for (const PreparedSample* s : batch) labels.push_back(s->label);
    const Var targets = g.constant(one_hot(labels, model.labels().size(), config.class_weights));

    std::optional<Rng> replay;
    if (noise) replay = *noise;
    Objective obj;
    obj.output = model.forward(g, batch, noise);
    obj.j_c = cross_entropy(targets, obj.output.probs);

    const Fusion& fusion = model.fusion();
    if (const GanFusion* gan = fusion.gan()) {
        Var d_fake_t = obj.output.fusion.text_side->d_fake;
        Var d_fake_v = obj.output.fusion.visual_side->d_fake;
        if (!config.adv_to_encoders) {
            // Same noise draws, latents cut off from the encoders.
            Rng* r = replay ? &*replay : nullptr;
            const Var zt = detach(*obj.output.latents.text);
            const Var zv = detach(*obj.output.latents.visual);
            d_fake_t = gan->text.discriminate(g, gan->text.generate(g, zt, r));
            d_fake_v = gan->visual.discriminate(g, gan->visual.generate(g, zv, r));
        }
        const bool ns = fusion.config().nonsaturating;
        obj.j_f = add(generator_loss(d_fake_t, ns), generator_loss(d_fake_v, ns));
    } else if (fusion.kind() == FusionKind::autofusion) {
        obj.j_f = auto_fusion_loss(*obj.output.fusion.joint, *obj.output.fusion.reconstruction);
    }
    obj.total = obj.j_f && config.lambda != 0.0 ? add(obj.j_c, scale(*obj.j_f, config.lambda)) : obj.j_c;
    return obj;
}

Var discriminator_objective(Graph& g, const GanFusion& gan, Var z_t, Var z_v, Rng* noise) {
    // GAN_t turns z_t towards z_v; GAN_v turns z_v towards z_t.
    const auto adv_t = gan_adv_loss(g, gan.text, z_v, z_t, noise);
    const auto adv_v = gan_adv_loss(g, gan.visual, z_t, z_v, noise);
    return total_gan_loss(adv_t.objective, adv_v.objective);
}

// ---- Trainer ----

Trainer::Trainer(FusionModel& model, TrainConfig config)
    : model_(model),
      config_(std::move(config)),
      main_opt_(config_.optimizer, config_.resolved_learning_rate(), config_.beta1, config_.beta2, config_.epsilon),
      disc_opt_(config_.optimizer, config_.resolved_discriminator_learning_rate(), config_.beta1, config_.beta2,
                config_.epsilon),
      shuffle_rng_(make_rng(config_.seed, 2)),
      d_noise_(make_rng(config_.seed, 3)),
      g_noise_(make_rng(config_.seed, 4)) {
    config_.validate();
    if (!config_.class_weights.empty() && config_.class_weights.size() != model_.labels().size())
        throw ConfigError("class_weights needs one weight per class");
    params_ = model_.parameters();
    for (auto& [name, t] : params_) {
        if (is_discriminator_parameter(name)) disc_params_.push_back(t);
        else main_params_.push_back(t);
        if (name.rfind("text.", 0) == 0) clip_params_.push_back(t);
    }
}

void Trainer::set_trainable(bool discriminator_phase) {
    for (auto& [name, t] : params_) {
        t->clear_grad();
        t->set_requires_grad(is_discriminator_parameter(name) == discriminator_phase);
    }
}

LossReport Trainer::step(std::span<const PreparedSample* const> batch) {
    try {
        return step_impl(batch);
    } catch (const DivergenceError&) {
        throw;
    } catch (const NumericError& e) {
        for (auto& [name, t] : params_) t->clear_grad();
        throw DivergenceError(steps_, e.what());
    }
}

LossReport Trainer::step_impl(std::span<const PreparedSample* const> batch) {
    if (batch.empty()) throw InputError("empty training batch");
    const Fusion& fusion = model_.fusion();
    const GanFusion* gan = fusion.gan();
    LossReport report;
    report.step = steps_;

    if (gan) {
        // Encoders and generators are frozen here, so the latents are constants.
        for (auto& [name, t] : params_) t->set_requires_grad(false);
        Tensor z_t, z_v;
        {
            Graph g0;
            const Latents z = model_.encode(g0, batch);
            z_t = z.text->value();
            z_v = z.visual->value();
        }
        set_trainable(true);
        for (std::size_t i = 0; i < config_.k; ++i) {
            Graph g;
            const Var t = g.constant(z_t);
            const Var v = g.constant(z_v);
            const Var j_adv = discriminator_objective(g, *gan, t, v, &d_noise_);
            g.backward(neg(j_adv));
            disc_opt_.step(disc_params_);
            report.components["J_adv_D"] = j_adv.item();
            if (on_update) on_update(UpdatePhase::discriminator, steps_);
        }
    }

    set_trainable(false);
    Graph g;
    const Objective obj = training_objective(g, model_, batch, config_, &g_noise_);
    if (gan) {
        const GanSide& ts = *obj.output.fusion.text_side;
        const GanSide& vs = *obj.output.fusion.visual_side;
        const double adv_t = adversarial_objective(ts.d_real, ts.d_fake).item();
        const double adv_v = adversarial_objective(vs.d_real, vs.d_fake).item();
        report.components["J_adv_t"] = adv_t;
        report.components["J_adv_v"] = adv_v;
        report.components["J_adv"] = total_gan_loss(adv_t, adv_v);
    } else if (obj.j_f) {
        report.components["J_auto"] = obj.j_f->item();
    }
    const Var total = obj.total;
    report.j_c = obj.j_c.item();
    report.j_f = obj.j_f ? obj.j_f->item() : 0.0;
    report.j = total.item();
    if (!std::isfinite(report.j)) throw DivergenceError(steps_, "non-finite objective");

    g.backward(total);
    if (config_.clip_norm > 0.0 && !clip_params_.empty()) {
        report.components["text_grad_norm"] = clip_gradient_norm(clip_params_, config_.clip_norm);
    }
    main_opt_.step(main_params_);
    if (on_update) on_update(UpdatePhase::generator, steps_);
    for (auto& [name, t] : params_) t->set_requires_grad(false);
    ++steps_;
    return report;
}

std::vector<LossReport> Trainer::fit(const std::vector<PreparedSample>& samples, const std::vector<std::size_t>& train) {
    if (train.empty()) throw ConfigError("training split is empty");
    for (std::size_t i : train)
        if (i >= samples.size()) throw InputError("training index out of range");
    std::vector<LossReport> curve;
    std::vector<std::size_t> order = train;
    const std::size_t epochs = config_.max_steps > 0 && config_.epochs == 0 ? SIZE_MAX : config_.epochs;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng_);
        for (const auto& idx : make_batches(order, config_.batch_size)) {
            if (config_.max_steps > 0 && steps_ >= config_.max_steps) return curve;
            std::vector<const PreparedSample*> batch;
            batch.reserve(idx.size());
            for (std::size_t i : idx) batch.push_back(&samples[i]);
            curve.push_back(step(batch));
        }
    }
    return curve;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossReport>& reports) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "step,J_C,J_F,J\n" << std::setprecision(17);
    for (const auto& r : reports) out << r.step << ',' << r.j_c << ',' << r.j_f << ',' << r.j << '\n';
}

}  // namespace fuselab
