#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fuselab/datakit.hpp"
#include "fuselab/metrics.hpp"
#include "fuselab/model.hpp"
#include "fuselab/trainer.hpp"

namespace fuselab {

// Process exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDivergence = 3;

struct DataConfig {
    // Exactly one of path and synthetic.
    std::optional<std::filesystem::path> path;
    std::optional<SyntheticSpec> synthetic;
    std::optional<LabelSpace> labels;
    SplitRatios split;
    // Relabel a multi-class dataset into its merged binary space before training.
    bool binarize = false;
    std::size_t min_count = 1;
};

struct EvalConfig {
    // File names inside the output directory.
    std::string metrics = "metrics.txt";
    std::size_t threads = 1;
};

/// JSON file with sections "model", "data", "train", "eval" and the keys
/// "name" and "seed". The seed drives initialization, splitting, shuffling
/// and GAN noise, and the synthetic data unless data.synthetic.seed is given.
struct ExperimentConfig {
    std::string name = "model";
    std::uint64_t seed = 1;
    ModelConfig model;
    DataConfig data;
    TrainConfig train;
    EvalConfig eval;
};

// ConfigError on unknown keys, bad values or missing data paths. Relative
// data paths resolve against base_dir.
ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
std::string experiment_config_json(const ExperimentConfig& config);

struct ExperimentResult {
    FusionModel model;
    Dataset data;
    Split split;
    std::vector<LossReport> losses;
    std::vector<Prediction> test_predictions;
    MetricsReport test_metrics;
    TableRow row;
};

Dataset load_experiment_data(const ExperimentConfig& config);

/// Builds the vocabulary from the training split, initializes, trains and
/// evaluates on the test split.
ExperimentResult run_experiment(const ExperimentConfig& config, const TextPipeline& text,
                                std::function<void(UpdatePhase, std::size_t)> on_update = {});

struct TrainArgs {
    std::filesystem::path config;
    std::filesystem::path out;
};

struct EvalArgs {
    std::filesystem::path model;
    std::filesystem::path data;
    bool binarize = false;
    std::size_t threads = 1;
    // Directory for the metrics files; defaults to the model's directory.
    std::optional<std::filesystem::path> out;
};

struct SynthArgs {
    SyntheticSpec spec;
    std::filesystem::path out;
};

// Each command reports problems on err and returns an exit code.
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);
int cmd_normalize(const std::filesystem::path& in, const std::filesystem::path& out_path, std::ostream& err);
int cmd_gradcheck(double tol, std::ostream& out, std::ostream& err);
int cmd_synth(const SynthArgs& args, std::ostream& err);

/// Metrics of predictions against a dataset, optionally both merged to the
/// binary space of the model's labels.
MetricsReport evaluate(const FusionModel& model, const Dataset& data, const std::vector<Prediction>& predictions,
                       bool binarize);

// ---- one-dimensional GAN toy ----

struct GanToyConfig {
    std::size_t steps = 3000;
    std::size_t batch = 128;
    std::size_t hidden = 16;
    std::size_t k = 5;
    double learning_rate = 5e-3;
    double beta1 = 0.5;
    // Linear decay of both learning rates to zero over the run.
    bool decay = true;
    // Source and target latents are both drawn from N(mean, stddev).
    double mean = 0.3;
    double stddev = 0.2;
    std::size_t held_out = 2000;
    std::uint64_t seed = 1;
};

struct GanToyResult {
    // Fraction of held-out real and generated samples the discriminator
    // classifies correctly at threshold 0.5.
    double discriminator_accuracy = 0.0;
    double final_adv = 0.0;
};

GanToyResult run_gan_toy(const GanToyConfig& config);

}  // namespace fuselab
