#pragma once

#include <optional>
#include <string>
#include <variant>

#include "fuselab/layers.hpp"

namespace fuselab {

enum class FusionKind { none, concat, autofusion, gan };
enum class Modality { text, visual };

std::string to_string(FusionKind kind);
FusionKind fusion_kind_from_string(const std::string& name);

// Lower clamp of discriminator outputs; the upper clamp is 1 - kDiscriminatorEpsilon.
inline constexpr double kDiscriminatorEpsilon = 1e-7;

struct FusionConfig {
    FusionKind kind = FusionKind::concat;
    std::size_t latent_dim = 64;
    // 0 selects the default: latent_dim for Auto-Fusion, GAN-Fusion and
    // projected concat, 2 * latent_dim for plain concat.
    std::size_t fuse_dim = 0;
    bool concat_projection = false;
    // GAN-Fusion; 0 selects max(1, latent_dim / 4) noise and 2 * latent_dim hidden units.
    std::size_t noise_dim = 0;
    std::size_t gan_hidden = 0;
    bool nonsaturating = true;
    bool combiner_raw_latents = false;
    // Which latent passes through when kind == none.
    Modality unimodal = Modality::text;

    std::size_t resolved_fuse_dim() const;
    std::size_t resolved_noise_dim() const;
    std::size_t resolved_gan_hidden() const;
};

/// Generator / discriminator pair of one modality. The generator maps a
/// source latent plus normal noise towards the other modality's latent; the
/// discriminator scores a latent as real (1) or generated (0).
class GanFusionModule {
public:
    GanFusionModule() = default;
    GanFusionModule(std::size_t latent_dim, std::size_t noise_dim, std::size_t hidden);

    void init(Rng& rng);

    // [B, d] source -> [B, d]. Noise is drawn from rng, or zero (the noise mean) when rng is null.
    Var generate(Graph& g, Var source, Rng* rng) const;
    // [B, d] -> [B, 1], clamped to [eps, 1 - eps].
    Var discriminate(Graph& g, Var x) const;

    std::size_t latent_dim() const noexcept { return gen_out_.out_dim(); }
    std::size_t noise_dim() const noexcept { return noise_dim_; }

    DenseLayer& generator_hidden() noexcept { return gen_hidden_; }
    DenseLayer& generator_output() noexcept { return gen_out_; }
    DenseLayer& discriminator_hidden() noexcept { return disc_hidden_; }
    DenseLayer& discriminator_output() noexcept { return disc_out_; }

    void for_each_parameter(const std::string& prefix, const ParamVisitor& f);
    void for_each_parameter(const std::string& prefix, const ConstParamVisitor& f) const;

private:
    std::size_t noise_dim_ = 1;
    DenseLayer gen_hidden_;
    DenseLayer gen_out_;
    DenseLayer disc_hidden_;
    DenseLayer disc_out_;
};

struct IdentityFusion {
    Modality modality = Modality::text;
};

struct ConcatFusion {
    std::optional<DenseLayer> projection;
};

struct AutoFusion {
    DenseLayer encoder;  // 2d -> d_fuse, tanh
    DenseLayer decoder;  // d_fuse -> 2d, identity
};

struct GanFusion {
    GanFusionModule text;    // z_t -> z_g, judged against z_v
    GanFusionModule visual;  // z_v -> z_g, judged against z_t
    DenseLayer combiner;     // [z_g^t; z_g^v] (+ [z_v; z_t]) -> d_fuse, tanh
    bool raw_latents = false;
};

struct GanSide {
    Var generated;
    Var d_real;  // D(target latent)
    Var d_fake;  // D(generated)
};

struct FusionOutput {
    Var fused;
    std::optional<Var> joint;           // z = [z_v; z_t]
    std::optional<Var> reconstruction;  // Auto-Fusion z-hat
    std::optional<GanSide> text_side;
    std::optional<GanSide> visual_side;
};

class Fusion {
public:
    Fusion() = default;
    explicit Fusion(const FusionConfig& config);

    void init(Rng& rng);

    /// z_v, z_t are [B, d]; the unused one may be absent for kind none.
    /// rng supplies GAN noise (null = zero noise).
    FusionOutput fuse(Graph& g, std::optional<Var> z_v, std::optional<Var> z_t, Rng* rng) const;

    FusionKind kind() const noexcept { return config_.kind; }
    const FusionConfig& config() const noexcept { return config_; }
    std::size_t fuse_dim() const noexcept { return config_.resolved_fuse_dim(); }

    GanFusion* gan() noexcept { return std::get_if<GanFusion>(&impl_); }
    const GanFusion* gan() const noexcept { return std::get_if<GanFusion>(&impl_); }
    AutoFusion* autofusion() noexcept { return std::get_if<AutoFusion>(&impl_); }
    ConcatFusion* concat() noexcept { return std::get_if<ConcatFusion>(&impl_); }

    void for_each_parameter(const std::string& prefix, const ParamVisitor& f);
    void for_each_parameter(const std::string& prefix, const ConstParamVisitor& f) const;

private:
    FusionConfig config_;
    std::variant<IdentityFusion, ConcatFusion, AutoFusion, GanFusion> impl_;
};

// True for parameter names belonging to a GAN discriminator.
bool is_discriminator_parameter(const std::string& name);

/// ||z_hat - z||^2, averaged over batch rows.
Var auto_fusion_loss(Var joint, Var reconstruction);

/// mean log D(real) + mean log(1 - D(fake)) over the minibatch.
Var adversarial_objective(Var d_real, Var d_fake);

/// Generator-side term as minimized: -mean log D(fake) (non-saturating) or
/// mean log(1 - D(fake)).
Var generator_loss(Var d_fake, bool nonsaturating);

struct AdversarialTerms {
    Var objective;  // J_adv of the module
    Var generated;
    Var d_real;
    Var d_fake;
};

/// One module's adversarial objective: real is the target-modality latent,
/// source feeds the generator.
AdversarialTerms gan_adv_loss(Graph& g, const GanFusionModule& module, Var real, Var source, Rng* rng);

/// J_adv = J_adv^t + J_adv^v
Var total_gan_loss(Var text_component, Var visual_component);
double total_gan_loss(double text_component, double visual_component);

}  // namespace fuselab
