// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Usage: fuselab_acceptance [criterion ...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "fuselab/experiment.hpp"
#include "fuselab/fusion.hpp"
#include "fuselab/gradsuite.hpp"
#include "fuselab/metrics.hpp"
#include "fuselab/ops.hpp"
#include "fuselab/textprep.hpp"
#include "fuselab/trainer.hpp"

using namespace fuselab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s << std::setprecision(precision) << v;
    return s.str();
}

fs::path config_path(const std::string& name) { return fs::path(FUSELAB_CONFIG_DIR) / (name + ".json"); }

void reseed(ExperimentConfig& c, std::uint64_t seed) {
    c.seed = seed;
    c.train.seed = seed;
    if (c.data.synthetic) c.data.synthetic->seed = seed;
}

const TextPipeline& pipeline() {
    static const TextPipeline text = TextPipeline::load(lexicon_dir());
    return text;
}

struct Scratch {
    fs::path path;
    Scratch() {
        path = fs::temp_directory_path() / ("fuselab_acceptance_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~Scratch() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- 2 ----
Outcome gradient_suite() {
    const auto t0 = Clock::now();
    const auto entries = run_gradient_suite(1e-4);
    const double elapsed = seconds_since(t0);
    std::size_t passed = 0;
    double worst = 0.0;
    for (const auto& e : entries) {
        passed += e.report.pass ? 1 : 0;
        worst = std::max(worst, e.report.max_rel_err);
        if (!e.report.pass) std::cout << "    failed: " << e.name << " err " << e.report.max_rel_err << '\n';
    }
    std::ostringstream sink, err;
    const int code = cmd_gradcheck(1e-4, sink, err);
    // layers, both fusion losses, cross-entropy and the end-to-end objectives must all be present
    bool covered = true;
    for (const char* needed : {"layer.dense", "layer.text_encoder", "layer.visual_encoder", "loss.auto_fusion",
                               "loss.gan_adv", "loss.cross_entropy", "objective.gan_fusion", "objective.auto_fusion"}) {
        const bool found = std::any_of(entries.begin(), entries.end(),
                                       [&](const SuiteEntry& e) { return e.name.rfind(needed, 0) == 0; });
        if (!found) std::cout << "    missing check group: " << needed << '\n';
        covered = covered && found;
    }
    return {passed == entries.size() && code == 0 && covered && elapsed < 120.0,
            std::to_string(passed) + "/" + std::to_string(entries.size()) + " checks at tol 1e-4, max rel err " +
                fmt(worst, 3) + ", " + fmt(elapsed, 3) + " s, cmd exit " + std::to_string(code)};
}

// ---- 3 ----
Outcome loss_oracles() {
    double worst = 0.0;
    auto track = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };

    // J_auto = 0 at a perfect reconstruction
    {
        Graph g;
        Tensor z({5, 8});
        Rng rng = make_rng(31);
        fill_normal(z, 0.0, 1.0, rng);
        track(auto_fusion_loss(g.constant(z), g.constant(z)).item(), 0.0);
    }
    // J_C = ln C for a uniform prediction, through a zero classifier's softmax
    for (std::size_t classes = 2; classes <= 6; ++classes) {
        Graph g;
        std::vector<std::size_t> labels{0, classes - 1, classes / 2};
        const Var probs = softmax(g.constant(Tensor({labels.size(), classes})));
        track(cross_entropy(g.constant(one_hot(labels, classes)), probs).item(), std::log(static_cast<double>(classes)));
    }
    // J_adv^t = J_adv^v = -2 ln 2 at an indifferent discriminator; J_adv is their sum
    {
        FusionConfig fc;
        fc.kind = FusionKind::gan;
        fc.latent_dim = 4;
        Fusion f(fc);
        Rng rng = make_rng(32);
        f.init(rng);
        GanFusion& gan = *f.gan();
        for (GanFusionModule* m : {&gan.text, &gan.visual})
            for (auto& v : m->discriminator_output().weight().data()) v = 0.0;
        for (GanFusionModule* m : {&gan.text, &gan.visual})
            for (auto& v : m->discriminator_output().bias().data()) v = 0.0;
        Tensor zt({6, 4}), zv({6, 4});
        fill_normal(zt, 0.0, 1.0, rng);
        fill_normal(zv, 0.0, 1.0, rng);
        Rng noise = make_rng(32, 3);
        Graph g;
        const Var t = g.constant(zt), v = g.constant(zv);
        const double half = 0.5;
        const double indifferent = std::log(half) + std::log(1.0 - half);
        const double jt = gan_adv_loss(g, gan.text, v, t, &noise).objective.item();
        const double jv = gan_adv_loss(g, gan.visual, t, v, &noise).objective.item();
        track(jt, indifferent);
        track(jv, indifferent);
        track(jt, -2.0 * std::log(2.0));
        Rng replay = make_rng(32, 3);
        Rng replay_t = make_rng(32, 3);
        const double total = discriminator_objective(g, gan, t, v, &replay).item();
        const double jt2 = gan_adv_loss(g, gan.text, v, t, &replay_t).objective.item();
        const double jv2 = gan_adv_loss(g, gan.visual, t, v, &replay_t).objective.item();
        track(total, jt2 + jv2);
        track(total_gan_loss(jt, jv), jt + jv);
    }
    return {worst <= 1e-9, "max abs deviation " + fmt(worst, 3) + " (tol 1e-9)"};
}

// ---- 4 ----
Outcome metrics_oracle() {
    std::mt19937_64 rng(4);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t classes = 2 + rng() % 5;
        const std::size_t n = 1 + rng() % 200;
        std::vector<std::string> names;
        for (std::size_t c = 0; c < classes; ++c) names.push_back("k" + std::to_string(c));
        const LabelSpace space(names, classes == 2 ? LabelMode::binary : LabelMode::multi);
        std::vector<std::size_t> t(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = rng() % classes;
            p[i] = rng() % 2 ? t[i] : rng() % classes;
        }
        const MetricsReport m = compute_metrics(confusion(t, p, space));
        double mp = 0, mr = 0, mf = 0, hits = 0;
        for (std::size_t c = 0; c < classes; ++c) {
            double tp = 0, fp = 0, fn = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (p[i] == c) (t[i] == c ? tp : fp) += 1;
                else if (t[i] == c) fn += 1;
            }
            const double pr = tp + fp == 0 ? 0 : tp / (tp + fp);
            const double re = tp + fn == 0 ? 0 : tp / (tp + fn);
            const double f = pr + re == 0 ? 0 : 2 * pr * re / (pr + re);
            worst = std::max({worst, std::abs(m.per_class[c].precision - pr), std::abs(m.per_class[c].recall - re),
                              std::abs(m.per_class[c].f1 - f)});
            mp += pr;
            mr += re;
            mf += f;
        }
        for (std::size_t i = 0; i < n; ++i) hits += t[i] == p[i];
        const double k = static_cast<double>(classes);
        worst = std::max({worst, std::abs(m.macro_precision - mp / k), std::abs(m.macro_recall - mr / k),
                          std::abs(m.macro_f1 - mf / k), std::abs(m.accuracy - hits / static_cast<double>(n))});
    }
    auto split = [](const char* s) {
        std::vector<std::string> out;
        for (; *s; ++s) out.emplace_back(1, *s);
        return out;
    };
    const LabelSpace hn({"H", "N"}, LabelMode::binary);
    const MetricsReport hand = compute_metrics(confusion(split("HHHHNNNNNN"), split("HHHNHNNNNN"), hn));
    const double macro_f = hand.macro_f1;
    std::ostringstream six;
    six << std::fixed << std::setprecision(6) << macro_f;
    const bool hand_ok = six.str() == "0.791667" && std::abs(macro_f - 19.0 / 24.0) < 1e-15 &&
                         std::abs(hand.accuracy - 0.8) < 1e-15;
    return {worst <= 1e-12 && hand_ok,
            "1000 cases max deviation " + fmt(worst, 3) + "; hand example macro-F " + six.str()};
}

// ---- 5 ----
Outcome fusion_benefit() {
    const std::vector<std::pair<std::string, bool>> models{
        {"xor-text", false}, {"xor-visual", false}, {"xor-concat", true}, {"xor-auto", true}, {"xor-gan", true}};
    bool pass = true;
    std::map<std::string, double> mean_acc;
    double slowest = 0.0;
    for (const auto& [name, fused] : models) {
        std::size_t good = 0;
        std::ostringstream accs;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            ExperimentConfig c = load_experiment_config(config_path(name));
            reseed(c, seed);
            const auto t0 = Clock::now();
            const ExperimentResult r = run_experiment(c, pipeline());
            const double elapsed = seconds_since(t0);
            slowest = std::max(slowest, elapsed);
            const double acc = r.test_metrics.accuracy;
            mean_acc[name] += acc / 5.0;
            accs << (seed > 1 ? " " : "") << std::fixed << std::setprecision(1) << 100.0 * acc;
            if (elapsed >= 300.0) pass = false;
            good += fused ? (acc >= 0.90) : (acc <= 0.55);
        }
        const bool ok = fused ? good >= 4 : good == 5;
        pass = pass && ok;
        std::cout << "    " << std::left << std::setw(11) << name << " test accuracy % by seed: " << accs.str()
                  << (ok ? "" : "  <- out of bounds") << '\n';
    }
    const double g = mean_acc["xor-gan"], a = mean_acc["xor-auto"], k = mean_acc["xor-concat"];
    std::cout << "    ordering (reported only): gan " << fmt(100 * g) << " / auto " << fmt(100 * a) << " / concat "
              << fmt(100 * k) << (g > a && a > k ? "  matches gan > auto > concat" : "  does not match gan > auto > concat")
              << '\n';
    return {pass, "unimodal <= 55% in 5/5 seeds, fused >= 90% in >= 4/5 seeds; slowest run " + fmt(slowest, 3) + " s"};
}

// ---- 6 ----
Outcome auto_fusion_descent() {
    ExperimentConfig c = load_experiment_config(config_path("xor-auto"));
    reseed(c, 3);
    c.data.synthetic->n = 1000;
    c.train.lambda = 1.0;
    c.train.epochs = 0;
    c.train.max_steps = 200;
    const ExperimentResult r = run_experiment(c, pipeline());
    const double first = r.losses.front().components.at("J_auto");
    const double last = r.losses.back().components.at("J_auto");
    return {r.losses.size() == 200 && last < 0.5 * first,
            "J_auto " + fmt(first) + " -> " + fmt(last) + " over " + std::to_string(r.losses.size()) +
                " steps (ratio " + fmt(last / first, 3) + ", bound 0.5)"};
}

// ---- 7 ----
Outcome gan_dynamics() {
    std::size_t inside = 0;
    double lo = 1.0, hi = 0.0;
    const std::size_t seeds = 20;
    for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
        GanToyConfig c;
        c.seed = seed;
        const double acc = run_gan_toy(c).discriminator_accuracy;
        lo = std::min(lo, acc);
        hi = std::max(hi, acc);
        inside += std::abs(acc - 0.5) <= 0.1;
    }
    return {inside == seeds, "held-out D accuracy within 0.5 +/- 0.1 in " + std::to_string(inside) + "/" +
                                 std::to_string(seeds) + " seeds, range [" + fmt(lo, 3) + ", " + fmt(hi, 3) + "]"};
}

// ---- 8 ----
Outcome normalizer_golden(const fs::path& scratch) {
    const std::string input = "@fiery_eyes, this is soooo coool borther! ;) #coolforever";
    const std::string want = "[user] fiery_eyes [/user] this is so cool brother! [wink] [hashtag] cool forever [/hashtag]";
    const std::string direct = normalize(input, Lexicon::load_dir(lexicon_dir())).str();
    {
        std::ofstream(scratch / "golden.txt") << input << '\n';
    }
    std::ostringstream err;
    const int code = cmd_normalize(scratch / "golden.txt", scratch / "golden.out", err);
    const std::string via_cmd = slurp(scratch / "golden.out");
    const bool ok = direct == want && code == 0 && via_cmd == want + "\n";
    return {ok, "\"" + direct + "\""};
}

// ---- 9 ----
std::vector<std::vector<double>> read_loss_csv(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(row);
    }
    return rows;
}

Outcome determinism(const fs::path& scratch) {
    bool ok = true;
    std::ostringstream detail;
    for (const char* name : {"xor-gan", "xor-auto"}) {
        std::ostringstream out, err;
        const int c1 = cmd_train({config_path(name), scratch / (std::string(name) + "-a")}, out, err);
        const int c2 = cmd_train({config_path(name), scratch / (std::string(name) + "-b")}, out, err);
        const auto a = read_loss_csv(scratch / (std::string(name) + "-a") / "loss.csv");
        const auto b = read_loss_csv(scratch / (std::string(name) + "-b") / "loss.csv");
        double worst = a.size() == b.size() && !a.empty() ? 0.0 : INFINITY;
        for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
            for (std::size_t j = 0; j < a[i].size(); ++j) worst = std::max(worst, std::abs(a[i][j] - b[i][j]));
        const bool same_table = slurp(scratch / (std::string(name) + "-a") / "metrics.txt") ==
                                slurp(scratch / (std::string(name) + "-b") / "metrics.txt");
        ok = ok && c1 == 0 && c2 == 0 && worst <= 1e-12 && same_table;
        detail << (detail.tellp() > 0 ? "; " : "") << name << ": " << a.size() << " steps, max curve diff " << fmt(worst, 3)
               << (same_table ? ", tables identical" : ", tables differ");
    }
    return {ok, detail.str()};
}

// ---- 10 ----
Outcome parameter_partition() {
    ExperimentConfig c = load_experiment_config(config_path("xor-gan"));
    c.data.synthetic->n = 1000;
    c.train.epochs = 0;
    c.train.max_steps = 100;
    c.train.k = 2;
    c.train.lambda = 1.0;

    const Dataset data = load_experiment_data(c);
    std::vector<std::vector<std::string>> docs;
    for (const auto& p : data.items) docs.push_back(pipeline().tokens(p, c.model.use_caption));
    FusionModel model(c.model, Vocabulary::build(docs), data.labels);
    model.init(c.seed);
    const auto samples = model.prepare(data, pipeline());
    std::vector<std::size_t> train(samples.size());
    for (std::size_t i = 0; i < train.size(); ++i) train[i] = i;

    std::vector<Tensor> snapshot;
    const auto take = [&] {
        snapshot.clear();
        for (auto& [name, t] : model.parameters()) snapshot.push_back(*t);
    };
    take();
    std::size_t d_updates = 0, g_updates = 0, violations = 0, idle = 0;
    Trainer trainer(model, c.train);
    trainer.on_update = [&](UpdatePhase phase, std::size_t) {
        const auto params = model.parameters();
        bool moved_own = false;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const bool changed = !(*params[i].second == snapshot[i]);
            const bool disc = is_discriminator_parameter(params[i].first);
            const bool own = phase == UpdatePhase::discriminator ? disc : !disc;
            if (changed && !own) ++violations;
            moved_own = moved_own || (changed && own);
        }
        if (!moved_own) ++idle;
        (phase == UpdatePhase::discriminator ? d_updates : g_updates) += 1;
        take();
    };
    trainer.fit(samples, train);
    return {violations == 0 && idle == 0 && g_updates == 100 && d_updates == 200,
            std::to_string(g_updates) + " steps, " + std::to_string(d_updates) + " D updates, " +
                std::to_string(g_updates) + " G updates, " + std::to_string(violations) + " cross-partition changes, " +
                std::to_string(idle) + " updates that moved nothing"};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
    const bool all = wanted.empty();
    Scratch scratch;

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient suite", gradient_suite},
        {"loss oracles", loss_oracles},
        {"metrics oracle", metrics_oracle},
        {"fusion benefit on xor-crossmodal", fusion_benefit},
        {"auto-fusion descent", auto_fusion_descent},
        {"gan dynamics on a 1-d toy", gan_dynamics},
        {"normalizer golden string", [&] { return normalizer_golden(scratch.path); }},
        {"training determinism", [&] { return determinism(scratch.path); }},
        {"parameter partition", parameter_partition},
    };

    bool substitutes_pass = true;
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int number = static_cast<int>(i) + 2;
        if (!all && !wanted.count(number)) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << std::setw(2) << number << "  " << criteria[i].first
                  << ": " << o.detail << "  [" << fmt(seconds_since(t0), 3) << " s]" << std::endl;
        substitutes_pass = substitutes_pass && o.pass;
        failures += o.pass ? 0 : 1;
    }
    if (all || wanted.count(1)) {
        bool ran_all = true;
        for (int n = 2; n <= 10; ++n) ran_all = ran_all && (all || wanted.count(n));
        const bool ok = ran_all && substitutes_pass;
        std::cout << (ok ? "PASS" : "FAIL")
                  << "  criterion  1  full-scale results: published M2 accuracy 79.2 and GAN-Fusion P 61.33 / R 51.34 / "
                     "F 55.89 need the original corpora and pretrained encoders and are not reproduced; "
                  << (ran_all ? (substitutes_pass ? "substitutes 2-10 pass" : "a substitute failed")
                              : "substitutes 2-10 were not all run")
                  << std::endl;
        failures += ok ? 0 : 1;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
