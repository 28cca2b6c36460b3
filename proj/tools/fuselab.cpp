#include <iostream>

#include "CLI11.hpp"
#include "fuselab/experiment.hpp"

using namespace fuselab;

int main(int argc, char** argv) {
    CLI::App app{"fuselab: multimodal fusion experiments"};
    app.require_subcommand(1);

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "train a model from an experiment config and evaluate it");
    train_cmd->add_option("--config", train.config, "experiment config (JSON)")->required();
    train_cmd->add_option("--out", train.out, "output directory")->required();

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved model on a JSON Lines dataset");
    eval_cmd->add_option("--model", eval.model, "model file")->required();
    eval_cmd->add_option("--data", eval.data, "JSON Lines dataset")->required();
    eval_cmd->add_flag("--binarize", eval.binarize, "merge classes to the binary space before scoring");
    eval_cmd->add_option("--threads", eval.threads, "evaluation threads")->capture_default_str();
    eval_cmd->add_option("--out", eval.out, "directory for eval_metrics.txt/.csv (default: model directory)");

    std::string in_path, out_path;
    auto* norm_cmd = app.add_subcommand("normalize", "normalize social text, one string per line");
    norm_cmd->add_option("--in", in_path, "input text file")->required();
    norm_cmd->add_option("--out", out_path, "output text file")->required();

    double tol = 1e-4;
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of every layer and objective");
    grad_cmd->add_option("--tol", tol, "max relative error")->capture_default_str();

    SynthArgs synth;
    std::string task = to_string(synth.spec.task);
    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic multimodal dataset");
    synth_cmd->add_option("--task", task, "xor-crossmodal | unimodal-separable")->capture_default_str();
    synth_cmd->add_option("--n", synth.spec.n, "number of publications")->capture_default_str();
    synth_cmd->add_option("--seed", synth.spec.seed, "seed")->capture_default_str();
    synth_cmd->add_option("--noise", synth.spec.noise, "grid noise std and keyword flip rate")->capture_default_str();
    synth_cmd->add_option("--grid", synth.spec.grid, "grid side")->capture_default_str();
    synth_cmd->add_option("--out", synth.out, "output JSON Lines file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    if (*train_cmd) return cmd_train(train, std::cout, std::cerr);
    if (*eval_cmd) return cmd_eval(eval, std::cout, std::cerr);
    if (*norm_cmd) return cmd_normalize(in_path, out_path, std::cerr);
    if (*grad_cmd) return cmd_gradcheck(tol, std::cout, std::cerr);
    try {
        synth.spec.task = synthetic_task_from_string(task);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return cmd_synth(synth, std::cerr);
}
