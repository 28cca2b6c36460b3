#include <sys/wait.h>

#include <cstdlib>
#include <random>

#include "fuselab/datakit.hpp"
#include "fuselab/errors.hpp"
#include "fuselab/experiment.hpp"
#include "support.hpp"

using namespace fuselab;

namespace {

struct CliRun {
    int code;
    std::string out;
};

CliRun cli(const std::string& args, const test::TempDir& dir) {
    const auto log = dir / "cli.log";
    const std::string cmd = std::string("\"") + FUSELAB_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, test::read_file(log)};
}

std::string quoted(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

// Small synthetic experiment; finishes in about a second.
std::string small_config(const std::string& fusion, const std::string& data = "", const std::string& extra_model = "") {
    const std::string data_section =
        data.empty() ? R"("synthetic": {"task": "xor-crossmodal", "n": 120, "noise": 0.1, "grid": 8})" : data;
    return R"({"name": "model", "seed": 4,
      "model": {"inputs": "text+visual", "latent_dim": 4, "embed_dim": 4, "hidden_dim": 4,
                "conv1_channels": 2, "conv2_channels": 4, "fusion": {"kind": ")" +
           fusion + "\"}" + extra_model + R"(},
      "data": {)" + data_section + R"(, "split": {"train": 0.6, "val": 0.1, "test": 0.3}},
      "train": {"epochs": 2, "batch_size": 16, "learning_rate": 0.01},
      "eval": {"metrics": "metrics.txt", "threads": 2}})";
}

// Multi-class publications over the six hate-speech classes.
void write_multiclass(const std::filesystem::path& path, std::size_t n) {
    SyntheticSpec spec;
    spec.n = n;
    spec.seed = 8;
    Dataset d = generate_synthetic(spec).data;
    d.labels = LabelSpace::mmhs150k();
    std::mt19937_64 rng(5);
    for (auto& p : d.items) p.label = rng() % d.labels.size();
    write_jsonl(path, d);
}

}  // namespace

TEST(Config, ParsesCheckedInExperiments) {
    for (const char* name : {"xor-text", "xor-visual", "xor-concat", "xor-auto", "xor-gan"}) {
        const ExperimentConfig c = load_experiment_config(std::filesystem::path(FUSELAB_CONFIG_DIR) / (std::string(name) + ".json"));
        EXPECT_EQ(c.data.synthetic->n, 4000u);
        EXPECT_EQ(c.data.synthetic->seed, c.seed);
        // the resolved form parses back to the same thing
        EXPECT_EQ(experiment_config_json(parse_experiment_config(experiment_config_json(c))), experiment_config_json(c));
    }
}

TEST(Config, RejectsUnknownKeysAndStraySeeds) {
    EXPECT_NO_THROW(parse_experiment_config(small_config("gan")));
    EXPECT_THROW(parse_experiment_config(small_config("gan", "", R"(, "dropout": 0.5)")), ConfigError);
    std::string s = small_config("gan");
    s.replace(s.find("\"epochs\""), 0, "\"seed\": 3, ");
    EXPECT_THROW(parse_experiment_config(s), ConfigError);
    EXPECT_THROW(parse_experiment_config(small_config("attention")), ConfigError);
    EXPECT_THROW(parse_experiment_config("{not json"), ConfigError);
    EXPECT_THROW(parse_experiment_config(small_config("gan", R"("path": "nowhere.jsonl")")), ConfigError);
}

TEST(Cli, MissingConfigExitsTwo) {
    test::TempDir dir;
    const CliRun r = cli("train --config " + quoted(dir / "absent.json") + " --out " + quoted(dir / "o"), dir);
    EXPECT_EQ(r.code, 2) << r.out;
}

TEST(Cli, UnknownFlagExitsTwo) {
    test::TempDir dir;
    EXPECT_EQ(cli("train --colour blue", dir).code, 2);
    EXPECT_EQ(cli("synth --task parity --out " + quoted(dir / "x.jsonl"), dir).code, 2);
}

TEST(Cli, TrainThenEvalReproducesTestMetrics) {
    test::TempDir dir;
    test::write_file(dir / "c.json", small_config("gan"));
    const CliRun train = cli("train --config " + quoted(dir / "c.json") + " --out " + quoted(dir / "run"), dir);
    ASSERT_EQ(train.code, 0) << train.out;
    for (const char* f : {"model.flm", "loss.csv", "config.json", "test.jsonl", "metrics.txt", "metrics.csv"})
        EXPECT_TRUE(std::filesystem::exists(dir / "run" / f)) << f;
    EXPECT_NE(train.out.find("Fusion type"), std::string::npos);

    const CliRun eval = cli("eval --model " + quoted(dir / "run" / "model.flm") + " --data " +
                             quoted(dir / "run" / "test.jsonl") + " --threads 3",
                         dir);
    ASSERT_EQ(eval.code, 0) << eval.out;
    EXPECT_EQ(test::read_file(dir / "run" / "eval_metrics.csv"), test::read_file(dir / "run" / "metrics.csv"));
    EXPECT_EQ(test::read_file(dir / "run" / "eval_metrics.txt"), test::read_file(dir / "run" / "metrics.txt"));
}

TEST(Cli, RepeatedTrainIsDeterministic) {
    test::TempDir dir;
    test::write_file(dir / "c.json", small_config("auto"));
    for (const char* out : {"a", "b"})
        ASSERT_EQ(cli("train --config " + quoted(dir / "c.json") + " --out " + quoted(dir / out), dir).code, 0);
    EXPECT_EQ(test::read_file(dir / "a" / "loss.csv"), test::read_file(dir / "b" / "loss.csv"));
    EXPECT_EQ(test::read_file(dir / "a" / "metrics.txt"), test::read_file(dir / "b" / "metrics.txt"));
    EXPECT_EQ(test::read_file(dir / "a" / "model.flm"), test::read_file(dir / "b" / "model.flm"));
}

TEST(Cli, EvalErrors) {
    test::TempDir dir;
    test::write_file(dir / "c.json", small_config("concat"));
    ASSERT_EQ(cli("train --config " + quoted(dir / "c.json") + " --out " + quoted(dir / "run"), dir).code, 0);
    const std::string model = " --model " + quoted(dir / "run" / "model.flm");

    test::write_file(dir / "empty.jsonl", "");
    EXPECT_EQ(cli("eval" + model + " --data " + quoted(dir / "empty.jsonl"), dir).code, 2);

    test::write_file(dir / "other.jsonl", "{\"id\":\"p\",\"text\":\"hi\",\"label\":\"Hate\"}\n");
    const CliRun mismatch = cli("eval" + model + " --data " + quoted(dir / "other.jsonl"), dir);
    EXPECT_EQ(mismatch.code, 2);
    EXPECT_NE(mismatch.out.find("label space"), std::string::npos) << mismatch.out;

    EXPECT_EQ(cli("eval --model " + quoted(dir / "none.flm") + " --data " + quoted(dir / "other.jsonl"), dir).code, 2);
}

TEST(Cli, BinarizedEvalEqualsPreMergedEval) {
    test::TempDir dir;
    write_multiclass(dir / "multi.jsonl", 150);
    const std::string data = R"("path": "multi.jsonl", "labels": "mmhs150k")";
    test::write_file(dir / "c.json", small_config("concat", data));
    ASSERT_EQ(cli("train --config " + quoted(dir / "c.json") + " --out " + quoted(dir / "run"), dir).code, 0);

    // The same publications relabelled into the binary space up front.
    const Dataset multi = load_jsonl(dir / "multi.jsonl", LabelSpace::mmhs150k());
    write_jsonl(dir / "binary.jsonl", multi.binarized());

    const std::string model = " --model " + quoted(dir / "run" / "model.flm");
    ASSERT_EQ(cli("eval" + model + " --binarize --data " + quoted(dir / "multi.jsonl") + " --out " + quoted(dir / "e1"), dir).code, 0);
    ASSERT_EQ(cli("eval" + model + " --data " + quoted(dir / "binary.jsonl") + " --out " + quoted(dir / "e2"), dir).code, 0);
    const std::string merged = test::read_file(dir / "e1" / "eval_metrics.csv");
    EXPECT_EQ(merged, test::read_file(dir / "e2" / "eval_metrics.csv"));
    EXPECT_NE(test::read_file(dir / "e1" / "eval_metrics.txt").find("NoHate"), std::string::npos);

    // Without --binarize the multi-class report has six classes.
    ASSERT_EQ(cli("eval" + model + " --data " + quoted(dir / "multi.jsonl") + " --out " + quoted(dir / "e3"), dir).code, 0);
    EXPECT_NE(test::read_file(dir / "e3" / "eval_metrics.txt").find("Religion-based"), std::string::npos);
}

TEST(Cli, DivergenceExitsThree) {
    test::TempDir dir;
    std::string c = small_config("concat");
    c.replace(c.find("\"learning_rate\": 0.01"), 21, "\"learning_rate\": 1e300, \"optimizer\": \"sgd\", \"clip_norm\": 0");
    test::write_file(dir / "c.json", c);
    const CliRun r = cli("train --config " + quoted(dir / "c.json") + " --out " + quoted(dir / "run"), dir);
    EXPECT_EQ(r.code, 3) << r.out;
    EXPECT_NE(r.out.find("step"), std::string::npos) << r.out;
}

TEST(Cli, NormalizeGolden) {
    test::TempDir dir;
    test::write_file(dir / "in.txt", "@fiery_eyes, this is soooo coool borther! ;) #coolforever\nthe cat sat\r\n");
    ASSERT_EQ(cli("normalize --in " + quoted(dir / "in.txt") + " --out " + quoted(dir / "out.txt"), dir).code, 0);
    EXPECT_EQ(test::read_file(dir / "out.txt"),
              "[user] fiery_eyes [/user] this is so cool brother! [wink] [hashtag] cool forever [/hashtag]\n"
              "the cat sat\n");
    EXPECT_EQ(cli("normalize --in " + quoted(dir / "missing.txt") + " --out " + quoted(dir / "o.txt"), dir).code, 2);
}

TEST(Cli, SynthIsByteIdentical) {
    test::TempDir dir;
    for (const char* f : {"a.jsonl", "b.jsonl"})
        ASSERT_EQ(cli("synth --task xor-crossmodal --n 50 --seed 42 --noise 0.2 --out " + quoted(dir / f), dir).code, 0);
    const std::string a = test::read_file(dir / "a.jsonl");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, test::read_file(dir / "b.jsonl"));
    EXPECT_EQ(load_jsonl(dir / "a.jsonl").size(), 50u);
    EXPECT_EQ(cli("synth --n 0 --out " + quoted(dir / "c.jsonl"), dir).code, 2);
}

TEST(Cli, GradcheckPasses) {
    test::TempDir dir;
    const CliRun r = cli("gradcheck --tol 1e-4", dir);
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("checks passed"), std::string::npos);
    EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}
