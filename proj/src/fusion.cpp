#include "fuselab/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "fuselab/errors.hpp"
#include "fuselab/ops.hpp"

namespace fuselab {

std::string to_string(FusionKind kind) {
    switch (kind) {
        case FusionKind::none: return "none";
        case FusionKind::concat: return "concat";
        case FusionKind::autofusion: return "auto";
        case FusionKind::gan: return "gan";
    }
    return "none";
}

FusionKind fusion_kind_from_string(const std::string& name) {
    if (name == "none") return FusionKind::none;
    if (name == "concat") return FusionKind::concat;
    if (name == "auto" || name == "auto-fusion") return FusionKind::autofusion;
    if (name == "gan" || name == "gan-fusion") return FusionKind::gan;
    throw ConfigError("unknown fusion mechanism '" + name + "'");
}

std::size_t FusionConfig::resolved_fuse_dim() const {
    if (fuse_dim) return fuse_dim;
    switch (kind) {
        case FusionKind::none: return latent_dim;
        case FusionKind::concat: return concat_projection ? latent_dim : 2 * latent_dim;
        default: return latent_dim;
    }
}

std::size_t FusionConfig::resolved_noise_dim() const { return noise_dim ? noise_dim : std::max<std::size_t>(1, latent_dim / 4); }

std::size_t FusionConfig::resolved_gan_hidden() const { return gan_hidden ? gan_hidden : 2 * latent_dim; }

// ---- GanFusionModule ----

GanFusionModule::GanFusionModule(std::size_t latent_dim, std::size_t noise_dim, std::size_t hidden)
    : noise_dim_(noise_dim),
      gen_hidden_(latent_dim + noise_dim, hidden, Activation::relu),
      gen_out_(hidden, latent_dim, Activation::tanh),
      disc_hidden_(latent_dim, hidden, Activation::relu),
      disc_out_(hidden, 1, Activation::sigmoid) {
    if (latent_dim == 0 || noise_dim == 0 || hidden == 0) throw ConfigError("GAN module dimensions must be positive");
}

void GanFusionModule::init(Rng& rng) {
    gen_hidden_.init_glorot(rng);
    gen_out_.init_glorot(rng);
    disc_hidden_.init_glorot(rng);
    disc_out_.init_glorot(rng);
}

Var GanFusionModule::generate(Graph& g, Var source, Rng* rng) const {
    if (source.value().rank() != 2 || source.dim(1) != latent_dim())
        throw DimensionError("generator expects [B, " + std::to_string(latent_dim()) + "], got " +
                             shape_string(source.shape()));
    Tensor noise({source.dim(0), noise_dim_});
    if (rng) fill_normal(noise, 0.0, 1.0, *rng);
    Var input = fuselab::concat({source, g.constant(std::move(noise))}, 1);
    return gen_out_.forward(g, gen_hidden_.forward(g, input));
}

Var GanFusionModule::discriminate(Graph& g, Var x) const {
    if (x.value().rank() != 2 || x.dim(1) != latent_dim())
        throw DimensionError("discriminator expects [B, " + std::to_string(latent_dim()) + "], got " +
                             shape_string(x.shape()));
    Var p = disc_out_.forward(g, disc_hidden_.forward(g, x));
    return clamp(p, kDiscriminatorEpsilon, 1.0 - kDiscriminatorEpsilon);
}

namespace {

template <class M, class F>
void visit_gan_module(M& m, const std::string& prefix, const F& f) {
    m.generator_hidden().for_each_parameter(prefix + "generator.hidden.", f);
    m.generator_output().for_each_parameter(prefix + "generator.output.", f);
    m.discriminator_hidden().for_each_parameter(prefix + "discriminator.hidden.", f);
    m.discriminator_output().for_each_parameter(prefix + "discriminator.output.", f);
}

}  // namespace

void GanFusionModule::for_each_parameter(const std::string& prefix, const ParamVisitor& f) {
    visit_gan_module(*this, prefix, f);
}
void GanFusionModule::for_each_parameter(const std::string& prefix, const ConstParamVisitor& f) const {
    visit_gan_module(const_cast<GanFusionModule&>(*this), prefix,
                     [&f](const std::string& name, const Tensor& t) { f(name, t); });
}

// ---- Fusion ----

Fusion::Fusion(const FusionConfig& config) : config_(config) {
    const std::size_t d = config.latent_dim;
    if (d == 0) throw ConfigError("latent dimension must be positive");
    const std::size_t fuse = config.resolved_fuse_dim();
    switch (config.kind) {
        case FusionKind::none:
            if (config.fuse_dim && config.fuse_dim != d)
                throw ConfigError("fusion 'none' passes the latent through; fuse_dim must equal latent_dim");
            impl_ = IdentityFusion{config.unimodal};
            break;
        case FusionKind::concat: {
            ConcatFusion c;
            if (config.concat_projection)
                c.projection = DenseLayer(2 * d, fuse, Activation::tanh);
            else if (fuse != 2 * d)
                throw ConfigError("concat fusion without projection has fuse_dim 2 * latent_dim");
            impl_ = std::move(c);
            break;
        }
        case FusionKind::autofusion:
            if (fuse >= 2 * d) throw ConfigError("Auto-Fusion requires fuse_dim < 2 * latent_dim");
            impl_ = AutoFusion{DenseLayer(2 * d, fuse, Activation::tanh), DenseLayer(fuse, 2 * d, Activation::identity)};
            break;
        case FusionKind::gan: {
            const std::size_t noise = config.resolved_noise_dim();
            const std::size_t hidden = config.resolved_gan_hidden();
            const std::size_t combiner_in = config.combiner_raw_latents ? 4 * d : 2 * d;
            impl_ = GanFusion{GanFusionModule(d, noise, hidden), GanFusionModule(d, noise, hidden),
                              DenseLayer(combiner_in, fuse, Activation::tanh), config.combiner_raw_latents};
            break;
        }
    }
}

void Fusion::init(Rng& rng) {
    std::visit(
        [&rng](auto& impl) {
            using T = std::decay_t<decltype(impl)>;
            if constexpr (std::is_same_v<T, ConcatFusion>) {
                if (impl.projection) impl.projection->init_glorot(rng);
            } else if constexpr (std::is_same_v<T, AutoFusion>) {
                impl.encoder.init_glorot(rng);
                impl.decoder.init_glorot(rng);
            } else if constexpr (std::is_same_v<T, GanFusion>) {
                impl.text.init(rng);
                impl.visual.init(rng);
                impl.combiner.init_glorot(rng);
            }
        },
        impl_);
}

FusionOutput Fusion::fuse(Graph& g, std::optional<Var> z_v, std::optional<Var> z_t, Rng* rng) const {
    const std::size_t d = config_.latent_dim;
    auto check = [d](const std::optional<Var>& z, const char* name) {
        if (!z) return;
        if (z->value().rank() != 2 || z->dim(1) != d)
            throw DimensionError(std::string(name) + " has shape " + shape_string(z->shape()) + ", expected [B, " +
                                 std::to_string(d) + "]");
    };
    check(z_v, "z_v");
    check(z_t, "z_t");

    if (const auto* id = std::get_if<IdentityFusion>(&impl_)) {
        const auto& z = id->modality == Modality::text ? z_t : z_v;
        if (!z) throw InputError("unimodal fusion is missing its latent");
        return FusionOutput{*z, {}, {}, {}, {}};
    }
    if (!z_v || !z_t) throw InputError("fusion requires both z_v and z_t");
    if (z_v->dim(0) != z_t->dim(0))
        throw DimensionError("latent batch sizes differ: " + shape_string(z_v->shape()) + " vs " +
                             shape_string(z_t->shape()));

    FusionOutput out;
    if (const auto* c = std::get_if<ConcatFusion>(&impl_)) {
        Var joint = fuselab::concat({*z_v, *z_t}, 1);
        out.joint = joint;
        out.fused = c->projection ? c->projection->forward(g, joint) : joint;
    } else if (const auto* a = std::get_if<AutoFusion>(&impl_)) {
        Var joint = fuselab::concat({*z_v, *z_t}, 1);
        out.joint = joint;
        out.fused = a->encoder.forward(g, joint);
        out.reconstruction = a->decoder.forward(g, out.fused);
    } else if (const auto* gan = std::get_if<GanFusion>(&impl_)) {
        Var gen_t = gan->text.generate(g, *z_t, rng);
        Var gen_v = gan->visual.generate(g, *z_v, rng);
        out.text_side = GanSide{gen_t, gan->text.discriminate(g, *z_v), gan->text.discriminate(g, gen_t)};
        out.visual_side = GanSide{gen_v, gan->visual.discriminate(g, *z_t), gan->visual.discriminate(g, gen_v)};
        Var combined = gan->raw_latents ? fuselab::concat({gen_t, gen_v, *z_v, *z_t}, 1) : fuselab::concat({gen_t, gen_v}, 1);
        out.fused = gan->combiner.forward(g, combined);
    }
    return out;
}

namespace {

template <class Impl, class F>
void visit_fusion(Impl& impl, const std::string& prefix, const F& f) {
    std::visit(
        [&](auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ConcatFusion>) {
                if (v.projection) v.projection->for_each_parameter(prefix + "projection.", f);
            } else if constexpr (std::is_same_v<T, AutoFusion>) {
                v.encoder.for_each_parameter(prefix + "encoder.", f);
                v.decoder.for_each_parameter(prefix + "decoder.", f);
            } else if constexpr (std::is_same_v<T, GanFusion>) {
                v.text.for_each_parameter(prefix + "gan_t.", f);
                v.visual.for_each_parameter(prefix + "gan_v.", f);
                v.combiner.for_each_parameter(prefix + "combiner.", f);
            }
        },
        impl);
}

}  // namespace

void Fusion::for_each_parameter(const std::string& prefix, const ParamVisitor& f) { visit_fusion(impl_, prefix, f); }
void Fusion::for_each_parameter(const std::string& prefix, const ConstParamVisitor& f) const {
    visit_fusion(const_cast<std::variant<IdentityFusion, ConcatFusion, AutoFusion, GanFusion>&>(impl_), prefix,
                 [&f](const std::string& name, const Tensor& t) { f(name, t); });
}

bool is_discriminator_parameter(const std::string& name) {
    return name.find(".discriminator.") != std::string::npos;
}

// ---- losses ----

Var auto_fusion_loss(Var joint, Var reconstruction) {
    if (joint.shape() != reconstruction.shape())
        throw DimensionError("auto_fusion_loss: shapes " + shape_string(joint.shape()) + " and " +
                             shape_string(reconstruction.shape()) + " differ");
    const double rows = joint.value().rank() == 2 ? static_cast<double>(joint.dim(0)) : 1.0;
    return scale(squared_norm(sub(reconstruction, joint)), 1.0 / rows);
}

Var adversarial_objective(Var d_real, Var d_fake) { return add(mean(log(d_real)), mean(log(one_minus(d_fake)))); }

Var generator_loss(Var d_fake, bool nonsaturating) {
    return nonsaturating ? neg(mean(log(d_fake))) : mean(log(one_minus(d_fake)));
}

AdversarialTerms gan_adv_loss(Graph& g, const GanFusionModule& module, Var real, Var source, Rng* rng) {
    if (real.shape() != source.shape())
        throw DimensionError("gan_adv_loss: real " + shape_string(real.shape()) + " and source " +
                             shape_string(source.shape()) + " differ");
    Var generated = module.generate(g, source, rng);
    Var d_real = module.discriminate(g, real);
    Var d_fake = module.discriminate(g, generated);
    return {adversarial_objective(d_real, d_fake), generated, d_real, d_fake};
}

Var total_gan_loss(Var text_component, Var visual_component) { return add(text_component, visual_component); }

double total_gan_loss(double text_component, double visual_component) {
    if (!std::isfinite(text_component) || !std::isfinite(visual_component))
        throw NumericError("total_gan_loss: non-finite component");
    return text_component + visual_component;
}

}  // namespace fuselab
