#include "fuselab/experiment.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "config_json.hpp"
#include "fuselab/errors.hpp"
#include "fuselab/gradsuite.hpp"
#include "fuselab/ops.hpp"
#include "fuselab/persistence.hpp"
#include "fuselab/textprep.hpp"

namespace fuselab {

using detail::json;

namespace {

std::uint64_t read_u64(const json& j, const char* key, std::uint64_t fallback, const std::string& section) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_unsigned())
        throw ConfigError("'" + section + "." + key + "' must be a non-negative integer");
    return j.at(key).get<std::uint64_t>();
}

double read_double(const json& j, const char* key, double fallback, const std::string& section) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw ConfigError("'" + section + "." + key + "' must be a number");
    return j.at(key).get<double>();
}

std::string read_string(const json& j, const char* key, const std::string& fallback, const std::string& section) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_string()) throw ConfigError("'" + section + "." + key + "' must be a string");
    return j.at(key).get<std::string>();
}

SyntheticSpec synthetic_from_json(const json& j, std::uint64_t seed) {
    const std::string s = "data.synthetic";
    detail::check_keys(j, {"task", "n", "seed", "noise", "grid", "vocabulary"}, s);
    SyntheticSpec spec;
    spec.task = synthetic_task_from_string(read_string(j, "task", to_string(spec.task), s));
    spec.n = read_u64(j, "n", spec.n, s);
    spec.seed = read_u64(j, "seed", seed, s);
    spec.noise = read_double(j, "noise", spec.noise, s);
    spec.grid = read_u64(j, "grid", spec.grid, s);
    if (j.contains("vocabulary")) {
        const json& v = j.at("vocabulary");
        if (!v.is_array()) throw ConfigError("'data.synthetic.vocabulary' must be an array of strings");
        spec.vocabulary.clear();
        for (const auto& w : v) {
            if (!w.is_string()) throw ConfigError("'data.synthetic.vocabulary' must be an array of strings");
            spec.vocabulary.push_back(w.get<std::string>());
        }
    }
    return spec;
}

json synthetic_to_json(const SyntheticSpec& spec) {
    return json{{"task", to_string(spec.task)}, {"n", spec.n},         {"seed", spec.seed},
                {"noise", spec.noise},          {"grid", spec.grid}, {"vocabulary", spec.vocabulary}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path.string());
    f << text;
    if (!f) throw ConfigError("cannot write " + path.string());
}

// Maps library errors onto exit codes.
int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const NumericError& e) {
        err << "error: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}

std::string row_model_name(const std::string& name) { return name.empty() ? "model" : name; }

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    detail::check_keys(j, {"name", "seed", "model", "data", "train", "eval"}, "config");
    ExperimentConfig c;
    c.name = read_string(j, "name", c.name, "config");
    c.seed = read_u64(j, "seed", c.seed, "config");
    c.model = detail::model_config_from_json(j.value("model", json::object()));

    const json train = j.value("train", json::object());
    if (train.is_object() && train.contains("seed")) throw ConfigError("'train.seed' is not allowed; set the top-level seed");
    c.train = detail::train_config_from_json(train);
    c.train.seed = c.seed;

    if (!j.contains("data")) throw ConfigError("missing 'data' section");
    const json& d = j.at("data");
    const std::string ds = "data";
    detail::check_keys(d, {"path", "synthetic", "labels", "split", "binarize", "min_count"}, ds);
    if (d.contains("path") == d.contains("synthetic"))
        throw ConfigError("'data' needs exactly one of 'path' and 'synthetic'");
    if (d.contains("path")) {
        std::filesystem::path p = read_string(d, "path", "", ds);
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        if (!std::filesystem::exists(p)) throw ConfigError("data file not found: " + p.string());
        c.data.path = p;
    } else {
        c.data.synthetic = synthetic_from_json(d.at("synthetic"), c.seed);
    }
    if (d.contains("labels")) c.data.labels = detail::label_space_from_json(d.at("labels"));
    if (d.contains("split")) {
        const json& sp = d.at("split");
        detail::check_keys(sp, {"train", "val", "test"}, "data.split");
        c.data.split.train = read_double(sp, "train", c.data.split.train, "data.split");
        c.data.split.val = read_double(sp, "val", c.data.split.val, "data.split");
        c.data.split.test = read_double(sp, "test", c.data.split.test, "data.split");
        const double total = c.data.split.train + c.data.split.val + c.data.split.test;
        if (c.data.split.train < 0 || c.data.split.val < 0 || c.data.split.test < 0 || std::abs(total - 1.0) > 1e-9)
            throw ConfigError("'data.split' ratios must be non-negative and sum to 1");
    }
    if (d.contains("binarize")) {
        if (!d.at("binarize").is_boolean()) throw ConfigError("'data.binarize' must be true or false");
        c.data.binarize = d.at("binarize").get<bool>();
    }
    c.data.min_count = read_u64(d, "min_count", c.data.min_count, ds);
    if (c.data.min_count == 0) throw ConfigError("'data.min_count' must be at least 1");

    const json ev = j.value("eval", json::object());
    detail::check_keys(ev, {"metrics", "threads"}, "eval");
    c.eval.metrics = read_string(ev, "metrics", c.eval.metrics, "eval");
    c.eval.threads = read_u64(ev, "threads", c.eval.threads, "eval");
    if (c.eval.metrics.empty() || std::filesystem::path(c.eval.metrics).has_parent_path())
        throw ConfigError("'eval.metrics' must be a plain file name");
    if (c.eval.threads == 0) throw ConfigError("'eval.threads' must be at least 1");
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_experiment_config(ss.str(), path.parent_path());
}

std::string experiment_config_json(const ExperimentConfig& c) {
    json data{{"split", {{"train", c.data.split.train}, {"val", c.data.split.val}, {"test", c.data.split.test}}},
              {"binarize", c.data.binarize},
              {"min_count", c.data.min_count}};
    if (c.data.path) data["path"] = c.data.path->string();
    if (c.data.synthetic) data["synthetic"] = synthetic_to_json(*c.data.synthetic);
    if (c.data.labels) data["labels"] = detail::to_json(*c.data.labels);
    json train = detail::to_json(c.train);
    train.erase("seed");
    const json j{{"name", c.name},
                 {"seed", c.seed},
                 {"model", detail::to_json(c.model)},
                 {"data", data},
                 {"train", train},
                 {"eval", {{"metrics", c.eval.metrics}, {"threads", c.eval.threads}}}};
    return j.dump(2) + "\n";
}

Dataset load_experiment_data(const ExperimentConfig& config) {
    Dataset data = config.data.synthetic ? generate_synthetic(*config.data.synthetic).data
                                         : load_jsonl(*config.data.path, config.data.labels);
    if (config.data.binarize) data = data.binarized();
    if (data.empty()) throw InputError("dataset is empty");
    return data;
}

MetricsReport evaluate(const FusionModel& model, const Dataset& data, const std::vector<Prediction>& predictions,
                       bool binarize) {
    if (predictions.size() != data.size()) throw InputError("prediction count does not match the dataset");
    if (data.empty()) throw InputError("dataset is empty");
    const LabelSpace& space = model.labels();
    std::vector<std::size_t> truths, preds;
    truths.reserve(data.size());
    preds.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        truths.push_back(data.items[i].label);
        preds.push_back(predictions[i].label);
    }
    if (data.labels == space) {
        if (!binarize) return compute_metrics(confusion(truths, preds, space));
        if (!space.has_merge()) throw ConfigError("the model's label space has no binary merge");
        for (auto& t : truths) t = space.merge_index(t);
        for (auto& p : preds) p = space.merge_index(p);
        return compute_metrics(confusion(truths, preds, space.binary_space()));
    }
    if (space.has_merge() && data.labels == space.binary_space()) {
        // Dataset already merged: merge the model's predictions to match.
        for (auto& p : preds) p = space.merge_index(p);
        return compute_metrics(confusion(truths, preds, data.labels));
    }
    throw ConfigError("label space of the data does not match the model");
}

ExperimentResult run_experiment(const ExperimentConfig& config, const TextPipeline& text,
                                std::function<void(UpdatePhase, std::size_t)> on_update) {
    config.model.validate();
    config.train.validate();
    ExperimentResult r;
    r.data = load_experiment_data(config);
    r.data.validate();
    r.split = split_indices(r.data.size(), config.data.split, config.seed);
    if (r.split.train.empty()) throw ConfigError("training split is empty");
    if (r.split.test.empty()) throw ConfigError("test split is empty");

    std::vector<std::vector<std::string>> docs;
    if (config.model.uses_text()) {
        for (std::size_t i : r.split.train) {
            const Publication& p = r.data.items[i];
            docs.push_back(text.tokens(p, config.model.use_caption));
            docs.push_back(text.tuple_words(p));
        }
    }
    r.model = FusionModel(config.model, Vocabulary::build(docs, config.data.min_count), r.data.labels);
    r.model.init(config.seed);
    const std::vector<PreparedSample> samples = r.model.prepare(r.data, text);

    Trainer trainer(r.model, config.train);
    trainer.on_update = std::move(on_update);
    r.losses = trainer.fit(samples, r.split.train);

    std::vector<PreparedSample> test;
    Dataset test_data{{}, r.data.labels};
    for (std::size_t i : r.split.test) {
        test.push_back(samples[i]);
        test_data.items.push_back(r.data.items[i]);
    }
    r.test_predictions = predict(r.model, test, config.eval.threads);
    r.test_metrics = evaluate(r.model, test_data, r.test_predictions, false);
    r.row = TableRow{row_model_name(config.name), to_string(config.model.inputs),
                     to_string(r.model.fusion().kind()), r.test_metrics};
    return r;
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ExperimentConfig config = load_experiment_config(args.config);
        const TextPipeline text = config.model.uses_text() ? TextPipeline::load(lexicon_dir()) : TextPipeline();
        std::filesystem::create_directories(args.out);
        ExperimentResult r = run_experiment(config, text);

        save_model(r.model, args.out / "model.flm");
        write_loss_csv(args.out / "loss.csv", r.losses);
        write_text(args.out / "config.json", experiment_config_json(config));
        Dataset test{{}, r.data.labels};
        for (std::size_t i : r.split.test) test.items.push_back(r.data.items[i]);
        write_jsonl(args.out / "test.jsonl", test);

        const std::string table = format_table({r.row});
        const std::string report = format_report(r.test_metrics);
        write_text(args.out / config.eval.metrics, table + "\n" + report);
        write_text(args.out / (std::filesystem::path(config.eval.metrics).stem().string() + ".csv"),
                   format_csv({r.row}));
        out << "data: " << r.data.size() << " publications (" << r.data.histogram_string() << "), train "
            << r.split.train.size() << ", val " << r.split.val.size() << ", test " << r.split.test.size() << '\n';
        if (!r.losses.empty()) {
            const LossReport& last = r.losses.back();
            out << "steps: " << last.step << ", final J_C " << std::setprecision(6) << last.j_c << ", J_F " << last.j_f
                << '\n';
        }
        out << table << '\n' << report;
        out << "wrote " << (args.out / "model.flm").string() << '\n';
        return kExitOk;
    });
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (args.threads == 0) throw ConfigError("--threads must be at least 1");
        const FusionModel model = load_model(args.model);
        Dataset data;
        try {
            data = load_jsonl(args.data, model.labels());
        } catch (const SchemaError&) {
            if (!model.labels().has_merge()) throw ConfigError("label space of the data does not match the model");
            try {
                data = load_jsonl(args.data, model.labels().binary_space());
            } catch (const SchemaError&) {
                throw ConfigError("label space of the data does not match the model");
            }
        }
        if (data.empty()) throw InputError("dataset is empty");
        const TextPipeline text =
            model.config().uses_text() ? TextPipeline::load(lexicon_dir()) : TextPipeline();
        // Per publication: the data may be in the merged space, labels only matter to evaluate().
        std::vector<PreparedSample> samples;
        samples.reserve(data.size());
        for (const auto& p : data.items) samples.push_back(model.prepare(p, text));
        const auto predictions = predict(model, samples, args.threads);
        const MetricsReport metrics = evaluate(model, data, predictions, args.binarize);
        const TableRow row{row_model_name(args.model.stem().string()), to_string(model.config().inputs),
                           to_string(model.fusion().kind()), metrics};
        const std::string table = format_table({row});
        const std::string report = format_report(metrics);
        out << table << '\n' << report;
        const auto dir = args.out ? *args.out : args.model.parent_path();
        if (!dir.empty()) std::filesystem::create_directories(dir);
        write_text(dir / "eval_metrics.txt", table + "\n" + report);
        write_text(dir / "eval_metrics.csv", format_csv({row}));
        return kExitOk;
    });
}

int cmd_normalize(const std::filesystem::path& in, const std::filesystem::path& out_path, std::ostream& err) {
    return guarded(err, [&] {
        std::ifstream src(in, std::ios::binary);
        if (!src) throw InputError("cannot read " + in.string());
        const Lexicon lexicon = Lexicon::load_dir(lexicon_dir());
        std::ostringstream result;
        std::string line;
        while (std::getline(src, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            result << normalize(line, lexicon).str() << '\n';
        }
        write_text(out_path, result.str());
        return kExitOk;
    });
}

int cmd_gradcheck(double tol, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (!(tol > 0)) throw ConfigError("--tol must be positive");
        const auto entries = run_gradient_suite(tol);
        std::size_t failed = 0;
        std::size_t width = 0;
        for (const auto& e : entries) width = std::max(width, e.name.size());
        for (const auto& e : entries) {
            out << std::left << std::setw(static_cast<int>(width + 2)) << e.name << std::right << std::scientific
                << std::setprecision(3) << e.report.max_rel_err << "  " << std::setw(5) << e.report.coordinates
                << " coords  " << (e.report.pass ? "ok" : "FAIL") << '\n';
            failed += e.report.pass ? 0 : 1;
        }
        out << std::defaultfloat << entries.size() - failed << '/' << entries.size() << " checks passed at tol " << tol
            << '\n';
        return failed == 0 ? kExitOk : kExitCheckFailed;
    });
}

int cmd_synth(const SynthArgs& args, std::ostream& err) {
    return guarded(err, [&] {
        const SyntheticData d = generate_synthetic(args.spec);
        if (args.out.has_parent_path()) std::filesystem::create_directories(args.out.parent_path());
        write_jsonl(args.out, d.data);
        return kExitOk;
    });
}

GanToyResult run_gan_toy(const GanToyConfig& c) {
    GanFusionModule m(1, 1, c.hidden);
    Rng init = make_rng(c.seed, 12);
    m.init(init);
    std::vector<Tensor*> d_params, g_params;
    m.for_each_parameter("gan.", [&](const std::string& name, Tensor& t) {
        (is_discriminator_parameter(name) ? d_params : g_params).push_back(&t);
    });
    const auto set_phase = [&](bool discriminator) {
        for (Tensor* t : d_params) t->set_requires_grad(discriminator);
        for (Tensor* t : g_params) t->set_requires_grad(!discriminator);
    };

    Rng data = make_rng(c.seed, 20);
    Rng d_noise = make_rng(c.seed, 3);
    Rng g_noise = make_rng(c.seed, 4);
    std::normal_distribution<double> latent(c.mean, c.stddev);
    const auto draw = [&](std::size_t n) {
        Tensor t({n, 1});
        for (auto& v : t.data()) v = latent(data);
        return t;
    };

    Optimizer d_opt(OptimizerKind::adam, c.learning_rate, c.beta1);
    Optimizer g_opt(OptimizerKind::adam, c.learning_rate, c.beta1);
    GanToyResult result;
    for (std::size_t step = 0; step < c.steps; ++step) {
        if (c.decay) {
            const double lr = c.learning_rate * (1.0 - static_cast<double>(step) / static_cast<double>(c.steps));
            d_opt.set_learning_rate(lr);
            g_opt.set_learning_rate(lr);
        }
        set_phase(true);
        for (std::size_t i = 0; i < c.k; ++i) {
            Graph g;
            const AdversarialTerms terms = gan_adv_loss(g, m, g.constant(draw(c.batch)), g.constant(draw(c.batch)), &d_noise);
            g.backward(neg(terms.objective));
            result.final_adv = terms.objective.item();
            d_opt.step(d_params);
        }
        set_phase(false);
        Graph g;
        const Var fake = m.generate(g, g.constant(draw(c.batch)), &g_noise);
        g.backward(generator_loss(m.discriminate(g, fake), true));
        g_opt.step(g_params);
    }
    for (Tensor* t : d_params) t->set_requires_grad(false);
    for (Tensor* t : g_params) t->set_requires_grad(false);

    Graph g;
    const Tensor real = draw(c.held_out);
    const Var fake = m.generate(g, g.constant(draw(c.held_out)), &g_noise);
    const Tensor d_real = m.discriminate(g, g.constant(real)).value();
    const Tensor d_fake = m.discriminate(g, fake).value();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < c.held_out; ++i) {
        correct += d_real[i] > 0.5 ? 1 : 0;
        correct += d_fake[i] < 0.5 ? 1 : 0;
    }
    result.discriminator_accuracy = static_cast<double>(correct) / static_cast<double>(2 * c.held_out);
    return result;
}

}  // namespace fuselab
