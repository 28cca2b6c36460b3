#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fuselab/model.hpp"

namespace fuselab {

enum class OptimizerKind { sgd, adam };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(const std::string& name);

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    // Stop after this many steps (0 = run all epochs).
    std::size_t max_steps = 0;
    OptimizerKind optimizer = OptimizerKind::adam;
    // Unset: 1e-2 for SGD, 1e-3 for Adam. The discriminator rate defaults to the main rate.
    std::optional<double> learning_rate;
    std::optional<double> discriminator_learning_rate;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    // Weight of the fusion loss term.
    double lambda = 1.0;
    // Discriminator updates per generator update.
    std::size_t k = 1;
    std::uint64_t seed = 1;
    // Gradient-norm clip on the text encoder (0 = off).
    double clip_norm = 5.0;
    // Empty = unweighted.
    std::vector<double> class_weights;
    // Whether the generator-side adversarial term reaches the encoders.
    bool adv_to_encoders = true;

    double resolved_learning_rate() const;
    double resolved_discriminator_learning_rate() const;
    void validate() const;
};

class Optimizer {
public:
    Optimizer() = default;
    Optimizer(OptimizerKind kind, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

    // Applies the accumulated gradients of params, then clears them.
    void step(std::span<Tensor* const> params);

    double learning_rate() const noexcept { return lr_; }
    void set_learning_rate(double lr) noexcept { lr_ = lr; }

private:
    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
        std::uint64_t t = 0;
    };

    OptimizerKind kind_ = OptimizerKind::sgd;
    double lr_ = 1e-2;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    std::unordered_map<const Tensor*, Moments> state_;
};

/// J = J_C + lambda * J_F where J_F is the generator-side adversarial term
/// (GAN-Fusion) or J_auto (Auto-Fusion) and 0 for concat.
struct LossReport {
    std::size_t step = 0;
    double j_c = 0.0;
    double j_f = 0.0;
    double j = 0.0;
    std::map<std::string, double> components;
};

/// Descent objective of one step: J_C, J_F and J = J_C + lambda * J_F.
struct Objective {
    ModelOutput output;
    Var j_c;
    std::optional<Var> j_f;
    Var total;
};

// noise supplies GAN noise (null = zero noise).
Objective training_objective(Graph& g, const FusionModel& model, std::span<const PreparedSample* const> batch,
                             const TrainConfig& config, Rng* noise);

/// J_adv = J_adv^t + J_adv^v on fixed latents; the discriminators ascend it.
Var discriminator_objective(Graph& g, const GanFusion& gan, Var z_t, Var z_v, Rng* noise);

enum class UpdatePhase { discriminator, generator };

class Trainer {
public:
    Trainer(FusionModel& model, TrainConfig config);

    // One optimization step: k discriminator updates then one descent update
    // for GAN-Fusion, a single descent update otherwise.
    LossReport step(std::span<const PreparedSample* const> batch);

    // Epochs over the given training indices, shuffled per epoch.
    std::vector<LossReport> fit(const std::vector<PreparedSample>& samples, const std::vector<std::size_t>& train);

    std::size_t steps_taken() const noexcept { return steps_; }
    const TrainConfig& config() const noexcept { return config_; }

    // Called after every parameter update.
    std::function<void(UpdatePhase, std::size_t step)> on_update;

private:
    void set_trainable(bool discriminator_phase);
    LossReport step_impl(std::span<const PreparedSample* const> batch);

    FusionModel& model_;
    TrainConfig config_;
    std::vector<std::pair<std::string, Tensor*>> params_;
    std::vector<Tensor*> disc_params_;
    std::vector<Tensor*> main_params_;
    std::vector<Tensor*> clip_params_;
    Optimizer main_opt_;
    Optimizer disc_opt_;
    Rng shuffle_rng_;
    Rng d_noise_;
    Rng g_noise_;
    std::size_t steps_ = 0;
};

// Rescales the joint gradient of params to at most max_norm; returns the norm before clipping.
double clip_gradient_norm(std::span<Tensor* const> params, double max_norm);

// step,J_C,J_F,J with 17 significant digits.
void write_loss_csv(const std::filesystem::path& path, const std::vector<LossReport>& reports);

}  // namespace fuselab
