// SPDX-License-Identifier: Apache-2.0

#include "edistill/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <system_error>

#include "CLI11.hpp"
#include "json.hpp"

#include "edistill/binary_io.hpp"
#include "edistill/distillation.hpp"
#include "edistill/report.hpp"

#ifndef EDISTILL_VERSION
#define EDISTILL_VERSION "0.1.0-unknown"
#endif

namespace edistill::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Files are written into <out>.partial and renamed over <out> on commit, so a
// failed command never leaves a half-written output directory.
class OutputDir {
public:
    explicit OutputDir(const std::string& out) : final_(out) {
        if (out.empty())
            throw ConfigError("--out is required");
        staging_ = final_;
        staging_ += ".partial";
        fs::remove_all(staging_);
        fs::create_directories(staging_);
    }
    OutputDir(const OutputDir&) = delete;
    OutputDir& operator=(const OutputDir&) = delete;
    ~OutputDir() {
        if (!committed_) {
            std::error_code ec;
            fs::remove_all(staging_, ec);
        }
    }

    fs::path path(const std::string& name) const { return staging_ / name; }
    const fs::path& staging() const { return staging_; }

    void commit() {
        fs::remove_all(final_);
        fs::rename(staging_, final_);
        committed_ = true;
    }

private:
    fs::path final_;
    fs::path staging_;
    bool committed_ = false;
};

void require(const std::string& value, const std::string& flag) {
    if (value.empty())
        throw ConfigError(flag + " is required");
}

void require_exists(const std::string& path, const std::string& flag) {
    require(path, flag);
    if (!fs::exists(path))
        throw IoError(flag + ": " + path + " does not exist");
}

void write_text(const fs::path& path, const std::string& text) { io::write_file_atomic(path, text); }

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

PhraseMode phrase_mode(const std::string& s) {
    if (s == "all" || s == "all_phrases")
        return PhraseMode::all_phrases;
    if (s == "sentence" || s == "sentence_only")
        return PhraseMode::sentence_only;
    throw ConfigError("--phrases must be all or sentence, got \"" + s + "\"");
}

Protocol make_protocol(const RunSpec& s, const OutputDir* out) {
    Protocol p;
    p.grid.learning_rates = s.lrs;
    p.grid.schemes.clear();
    for (const auto& name : s.decay_schemes)
        p.grid.schemes.push_back(parse_decay(name));
    p.grid.dropouts = s.dropouts;
    if (p.grid.size() == 0)
        throw ConfigError("the hyperparameter grid is empty");
    p.base.batch_size = s.batch_size;
    p.base.max_epochs = s.max_epochs;
    p.base.patience = s.patience;
    p.base.seed = s.seed;
    for (double lr : s.lrs) {
        TrainConfig c = p.base;
        c.learning_rate = lr;
        c.validate();
    }
    for (double d : s.dropouts) {
        TrainConfig c = p.base;
        c.dropout = d;
        c.validate();
    }
    p.seeds = s.seeds;
    p.n_classes = s.n_classes;
    p.n_hidden = s.n_hidden;
    p.n_distill = s.n_distill;
    p.n_small_embed = s.n_small_embed;
    p.jobs = s.jobs;
    if (out) {
        p.log_dir = out->path("logs");
        fs::create_directories(*p.log_dir);
    }
    return p;
}

void warn_zero_lr(const RunSpec& s, std::ostream& out) {
    if (std::find(s.lrs.begin(), s.lrs.end(), 0.0) != s.lrs.end())
        out << "warning: learning rate 0 leaves the parameters unchanged\n";
}

EmbeddingTable<float> aligned_table(const std::string& path, const DatasetSplits& splits,
                                    std::uint64_t seed, std::ostream& out) {
    const auto pretrained = load_any_table(path);
    Rng rng(seed);
    auto table = align_table(pretrained, splits.vocab, rng);
    std::size_t found = 0;
    for (std::size_t i = 0; i < splits.vocab.size(); ++i)
        found += i != splits.vocab.unk_index() && pretrained.vocab.contains(splits.vocab.word(i));
    out << "embeddings\t" << path << "\tdim=" << table.dim() << "\tfound " << found << " of "
        << splits.vocab.size() - 1 << " words\n";
    return table;
}

const std::vector<Sample>& pick_split(const DatasetSplits& d, const std::string& name) {
    if (name == "train")
        return d.train;
    if (name == "valid")
        return d.valid;
    if (name == "test")
        return d.test;
    throw ConfigError("--split must be train, valid or test, got \"" + name + "\"");
}

void check_vocab(const ClassifierModel<float>& m, const DatasetSplits& d, const std::string& path) {
    if (!(m.embedding.vocab == d.vocab))
        throw ConfigError(path + ": model vocabulary does not match the prepared data");
}

void print_summary(const RegimeResult& r, std::ostream& out) {
    const auto& b = r.grid.best;
    out << "regime\t" << regime_name(r.spec.tag) << "\n"
        << "selected\tlr=" << fmt("%g", b.learning_rate) << "\tdecay=" << decay_name(b.decay)
        << "\tdropout=" << fmt("%g", b.dropout) << "\tvalid=" << fmt("%.2f", r.grid.best_trial.best_valid_acc)
        << "\n"
        << "accuracy\t" << format_mean_std(r.aggregate.mean, r.aggregate.stddev) << "\n"
        << "best_valid_test_acc\t" << fmt("%.2f", r.aggregate.best_valid_test_acc) << "\n"
        << "deployed_parameters\t" << r.deployed_parameters << "\n";
}

void write_regime_outputs(const RegimeResult& r, const Protocol& p, OutputDir& dir) {
    save_model(r.trained, dir.path("model.mdl"));
    save_model(r.deployed, dir.path("deployed.mdl"));
    write_text(dir.path("results.json"), regime_result_json(r, p, version()).dump(2) + "\n");
}

// ---- commands --------------------------------------------------------------

int cmd_prepare(const RunSpec& s, std::ostream& out) {
    require_exists(s.train, "--train");
    require_exists(s.valid, "--valid");
    require_exists(s.test, "--test");
    const PhraseMode mode = phrase_mode(s.phrases);
    const auto train = load_trees(s.train);
    const auto valid = load_trees(s.valid);
    const auto test = load_trees(s.test);
    const Vocabulary vocab = build_vocab(train, s.lowercase);

    auto samples = [&](const std::vector<LabeledTree>& trees, PhraseMode m) {
        std::vector<Sample> all;
        for (const auto& t : trees) {
            auto part = extract_samples(t, m, vocab, s.lowercase);
            all.insert(all.end(), part.begin(), part.end());
        }
        return all;
    };
    auto node_total = [](const std::vector<LabeledTree>& trees) {
        std::size_t n = 0;
        for (const auto& t : trees)
            n += t.node_count();
        return n;
    };

    OutputDir dir(s.out);
    save_vocab(vocab, dir.path("vocab.bin"));
    save_samples(samples(train, mode), dir.path("train.spl"));
    save_samples(samples(valid, PhraseMode::sentence_only), dir.path("valid.spl"));
    save_samples(samples(test, PhraseMode::sentence_only), dir.path("test.spl"));
    dir.commit();

    out << "vocabulary\t" << vocab.size() << "\n"
        << "split\tsentences\tphrases\n"
        << "train\t" << train.size() << "\t" << node_total(train) << "\n"
        << "valid\t" << valid.size() << "\t" << node_total(valid) << "\n"
        << "test\t" << test.size() << "\t" << node_total(test) << "\n"
        << "train_mode\t" << (mode == PhraseMode::all_phrases ? "all_phrases" : "sentence_only") << "\n";
    return kOk;
}

int cmd_train(const RunSpec& s, std::ostream& out) {
    require_exists(s.data, "--data");
    if (!s.embeddings.empty())
        require_exists(s.embeddings, "--embeddings");
    const auto splits = load_prepared(s.data);
    warn_zero_lr(s, out);
    OutputDir dir(s.out);
    const Protocol p = make_protocol(s, &dir);
    std::optional<EmbeddingTable<float>> small;
    if (!s.embeddings.empty())
        small = aligned_table(s.embeddings, splits, s.seed, out);
    RegimeInputs inputs;
    inputs.small = small ? &*small : nullptr;
    const auto r = run_regime(RegimeSpec{Regime::direct}, splits, inputs, p);
    write_regime_outputs(r, p, dir);
    dir.commit();
    print_summary(r, out);
    return kOk;
}

int cmd_teacher(const RunSpec& s, std::ostream& out) {
    require_exists(s.data, "--data");
    require_exists(s.embeddings, "--embeddings");
    const auto splits = load_prepared(s.data);
    warn_zero_lr(s, out);
    OutputDir dir(s.out);
    const Protocol p = make_protocol(s, &dir);
    const auto large = aligned_table(s.embeddings, splits, s.seed, out);
    const auto t = train_teacher(splits, large, p, s.teacher_hidden);
    save_model(t.model, dir.path("teacher.mdl"));
    json trials = json::array();
    for (const auto& tr : t.grid.trials)
        trials.push_back(trial_json(tr));
    const double va = accuracy(t.model, splits.valid);
    const double te = accuracy(t.model, splits.test);
    const json summary{{"valid_acc", va},
                       {"test_acc", te},
                       {"parameters", count_parameters(t.model)},
                       {"selected", trial_json(t.grid.best_trial)},
                       {"grid_trials", trials},
                       {"version", version()}};
    write_text(dir.path("teacher.json"), summary.dump(2) + "\n");
    dir.commit();
    out << "teacher\tvalid=" << fmt("%.2f", va) << "\ttest=" << fmt("%.2f", te)
        << "\tparameters=" << count_parameters(t.model) << "\n";
    return kOk;
}

int cmd_soft_targets(const RunSpec& s, std::ostream& out) {
    require_exists(s.teacher, "--teacher");
    require_exists(s.data, "--data");
    const auto splits = load_prepared(s.data);
    const auto teacher = load_model(s.teacher);
    check_vocab(teacher, splits, s.teacher);
    OutputDir dir(s.out);
    const auto targets = generate_soft_targets(teacher, splits.train, s.temperature);
    save_soft_targets(targets, dir.path("soft_targets.sft"));
    dir.commit();
    out << "soft_targets\t" << targets.size() << "\tT=" << fmt("%g", s.temperature) << "\n";
    return kOk;
}

int cmd_distill(const RunSpec& s, std::ostream& out) {
    require_exists(s.data, "--data");
    const Regime regime = parse_regime(s.regime);
    if (regime == Regime::direct)
        throw ConfigError("distill --regime must be encoding or matching; use `train` for the direct regime");
    const auto splits = load_prepared(s.data);
    warn_zero_lr(s, out);
    OutputDir dir(s.out);
    const Protocol p = make_protocol(s, &dir);

    std::optional<EmbeddingTable<float>> large, small;
    std::optional<SoftTargetSet> targets;
    RegimeInputs inputs;
    if (regime == Regime::encoding) {
        require_exists(s.embeddings, "--embeddings");
        large = aligned_table(s.embeddings, splits, s.seed, out);
        inputs.large = &*large;
    } else {
        if (!s.soft_targets.empty()) {
            require_exists(s.soft_targets, "--soft-targets");
            targets = load_soft_targets(s.soft_targets);
        } else {
            require_exists(s.teacher, "--teacher (or --soft-targets)");
            const auto teacher = load_model(s.teacher);
            check_vocab(teacher, splits, s.teacher);
            targets = generate_soft_targets(teacher, splits.train, s.temperature);
        }
        inputs.soft_targets = &*targets;
        if (!s.small_embeddings.empty()) {
            require_exists(s.small_embeddings, "--small-embeddings");
            small = aligned_table(s.small_embeddings, splits, s.seed, out);
            inputs.small = &*small;
        }
    }
    const auto r = run_regime(RegimeSpec{regime, s.temperature}, splits, inputs, p);
    write_regime_outputs(r, p, dir);
    dir.commit();
    print_summary(r, out);
    return kOk;
}

int cmd_fold(const RunSpec& s, std::ostream& out) {
    require_exists(s.model, "--model");
    const auto m = load_model(s.model);
    const auto folded = fold_model(m);
    OutputDir dir(s.out);
    save_model(folded, dir.path("folded.mdl"));
    dir.commit();
    out << "parameters\t" << count_parameters(m) << "\nfolded_parameters\t" << count_parameters(folded) << "\n";
    return kOk;
}

int cmd_eval(const RunSpec& s, std::ostream& out) {
    require_exists(s.model, "--model");
    require_exists(s.data, "--data");
    const auto m = load_model(s.model);
    const auto splits = load_prepared(s.data);
    check_vocab(m, splits, s.model);
    const auto& samples = pick_split(splits, s.split);
    out << "split\t" << s.split << "\nsamples\t" << samples.size() << "\naccuracy\t"
        << fmt("%.4f", accuracy(m, samples)) << "\n";
    return kOk;
}

double time_pass(const ClassifierModel<float>& m, const std::vector<Sample>& samples, std::size_t& sink) {
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& x : samples)
        sink += predict(m, std::span<const std::size_t>(x.tokens));
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_bench(const RunSpec& s, std::ostream& out) {
    if (s.reps < 3)
        throw ConfigError("--reps must be >= 3, got " + std::to_string(s.reps));
    require_exists(s.small_model, "--small-model");
    require_exists(s.large_model, "--large-model");
    require_exists(s.data, "--data");
    const auto small = load_model(s.small_model);
    const auto large = load_model(s.large_model);
    const auto splits = load_prepared(s.data);
    check_vocab(small, splits, s.small_model);
    check_vocab(large, splits, s.large_model);
    const auto& corpus = pick_split(splits, s.split);
    if (corpus.empty())
        throw ConfigError("benchmark corpus is empty");

    std::size_t sink = 0;
    time_pass(small, corpus, sink); // warm-up
    time_pass(large, corpus, sink);
    std::vector<double> ts, tl;
    for (std::size_t i = 0; i < s.reps; ++i) {
        ts.push_back(time_pass(small, corpus, sink));
        tl.push_back(time_pass(large, corpus, sink));
    }
    const double ms = median(ts);
    const double ml = median(tl);
    const double ratio = ms / ml;
    out << "small_seconds\t" << fmt("%.6f", ms) << "\nlarge_seconds\t" << fmt("%.6f", ml) << "\nrelative_time\t"
        << fmt("%.4f", ratio) << "\nsmall_parameters\t" << count_parameters(small) << "\nlarge_parameters\t"
        << count_parameters(large) << "\n";
    if (!s.out.empty()) {
        OutputDir dir(s.out);
        const json j{{"small_median_seconds", ms},
                     {"large_median_seconds", ml},
                     {"relative_time", ratio},
                     {"reps", s.reps},
                     {"samples", corpus.size()},
                     {"small_parameters", count_parameters(small)},
                     {"large_parameters", count_parameters(large)},
                     {"checksum", sink}};
        write_text(dir.path("bench.json"), j.dump(2) + "\n");
        dir.commit();
    }
    return kOk;
}

json read_json(const std::string& path) {
    try {
        return json::parse(io::read_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what(), e.byte);
    }
}

int cmd_compare(const RunSpec& s, std::ostream& out) {
    if (s.results.empty())
        throw ConfigError("--results is required");
    std::vector<json> results;
    for (const auto& p : s.results) {
        require_exists(p, "--results");
        results.push_back(read_json(p));
    }
    std::optional<double> rel;
    if (!s.bench.empty()) {
        require_exists(s.bench, "--bench");
        rel = read_json(s.bench).at("relative_time").get<double>();
    }
    if (s.format != "tsv" && s.format != "text" && s.format != "both")
        throw ConfigError("--format must be tsv, text or both");
    const auto report = build_report(results, rel, version());
    const std::string text = format_text(report);
    if (!s.out.empty()) {
        OutputDir dir(s.out);
        if (s.format != "text")
            write_text(dir.path("report.tsv"), format_tsv(report));
        if (s.format != "tsv")
            write_text(dir.path("report.txt"), text);
        dir.commit();
    }
    out << text;
    return kOk;
}

// ---- option wiring ---------------------------------------------------------

std::string find_config(const std::vector<std::string>& args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size())
            return args[i + 1];
        if (args[i].rfind("--config=", 0) == 0)
            return args[i].substr(9);
    }
    return {};
}

void add_common(CLI::App* sub, RunSpec& s, std::string& config_path) {
    sub->add_option("--config", config_path, "JSON run configuration (flags override it)");
    sub->add_option("--seed", s.seed, "Seed for grid trials and table alignment");
    sub->add_option("--jobs", s.jobs, "Maximum concurrent trials")->check(CLI::PositiveNumber);
    sub->add_option("--out", s.out, "Output directory");
}

void add_protocol(CLI::App* sub, RunSpec& s) {
    sub->add_option("--data", s.data, "Prepared data directory");
    sub->add_option("--lr", s.lrs, "Learning-rate grid")->delimiter(',');
    sub->add_option("--decay", s.decay_schemes, "Decay schemes: constant, halve_every_3, inverse")->delimiter(',');
    sub->add_option("--dropout", s.dropouts, "Dropout grid")->delimiter(',');
    sub->add_option("--seeds", s.seeds, "Restart seeds")->delimiter(',');
    sub->add_option("--batch-size", s.batch_size);
    sub->add_option("--epochs", s.max_epochs, "Epoch budget per trial");
    sub->add_option("--patience", s.patience, "Early-stopping patience (0 = off)");
    sub->add_option("--n-classes", s.n_classes);
    sub->add_option("--n-hidden", s.n_hidden);
}

} // namespace

std::string version() { return EDISTILL_VERSION; }

void apply_config_json(const std::string& json_text, RunSpec& s) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw ConfigError("config must be a JSON object");
    try {
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string& k = it.key();
            const json& v = it.value();
            if (k == "train") s.train = v.get<std::string>();
            else if (k == "valid") s.valid = v.get<std::string>();
            else if (k == "test") s.test = v.get<std::string>();
            else if (k == "data") s.data = v.get<std::string>();
            else if (k == "embeddings") s.embeddings = v.get<std::string>();
            else if (k == "small_embeddings") s.small_embeddings = v.get<std::string>();
            else if (k == "teacher") s.teacher = v.get<std::string>();
            else if (k == "soft_targets") s.soft_targets = v.get<std::string>();
            else if (k == "model") s.model = v.get<std::string>();
            else if (k == "small_model") s.small_model = v.get<std::string>();
            else if (k == "large_model") s.large_model = v.get<std::string>();
            else if (k == "results") s.results = v.get<std::vector<std::string>>();
            else if (k == "bench") s.bench = v.get<std::string>();
            else if (k == "out") s.out = v.get<std::string>();
            else if (k == "split") s.split = v.get<std::string>();
            else if (k == "phrases") s.phrases = v.get<std::string>();
            else if (k == "lowercase") s.lowercase = v.get<bool>();
            else if (k == "seed") s.seed = v.get<std::uint64_t>();
            else if (k == "seeds") s.seeds = v.get<std::vector<std::uint64_t>>();
            else if (k == "jobs") s.jobs = v.get<std::size_t>();
            else if (k == "lrs") s.lrs = v.get<std::vector<double>>();
            else if (k == "decay_schemes") s.decay_schemes = v.get<std::vector<std::string>>();
            else if (k == "dropouts") s.dropouts = v.get<std::vector<double>>();
            else if (k == "batch_size") s.batch_size = v.get<std::size_t>();
            else if (k == "max_epochs") s.max_epochs = v.get<std::size_t>();
            else if (k == "patience") s.patience = v.get<std::size_t>();
            else if (k == "n_classes") s.n_classes = v.get<std::size_t>();
            else if (k == "n_hidden") s.n_hidden = v.get<std::size_t>();
            else if (k == "n_distill") s.n_distill = v.get<std::size_t>();
            else if (k == "n_small_embed") s.n_small_embed = v.get<std::size_t>();
            else if (k == "teacher_hidden") s.teacher_hidden = v.get<std::size_t>();
            else if (k == "temperature") s.temperature = v.get<double>();
            else if (k == "regime") s.regime = v.get<std::string>();
            else if (k == "reps") s.reps = v.get<std::size_t>();
            else if (k == "format") s.format = v.get<std::string>();
            else throw ConfigError("unknown config key \"" + k + "\"");
        }
    } catch (const json::type_error& e) {
        throw ConfigError(std::string("config value has the wrong type: ") + e.what());
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunSpec s;
    try {
        const std::string config = find_config(args);
        if (!config.empty())
            apply_config_json(io::read_file(config), s);
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    }

    CLI::App app{"Distil large word embeddings into small ones and compare training regimes", "edistill"};
    app.require_subcommand(1);
    app.set_version_flag("--version", version());
    std::string config_path;

    auto* prepare = app.add_subcommand("prepare", "Parse tree files into vocabulary and split caches");
    add_common(prepare, s, config_path);
    prepare->add_option("--train", s.train);
    prepare->add_option("--valid", s.valid);
    prepare->add_option("--test", s.test);
    prepare->add_option("--phrases", s.phrases, "Training samples: all (every node) or sentence");
    prepare->add_flag("--lowercase", s.lowercase);

    auto* train = app.add_subcommand("train", "Train the direct small network (grid search + restarts)");
    add_common(train, s, config_path);
    add_protocol(train, s);
    train->add_option("--embeddings", s.embeddings, "Small pretrained table (random if omitted)");
    train->add_option("--n-embed", s.n_small_embed, "Random table dimension");

    auto* teacher = app.add_subcommand("teacher", "Train the teacher over the large table");
    add_common(teacher, s, config_path);
    add_protocol(teacher, s);
    teacher->add_option("--embeddings", s.embeddings, "Large pretrained table");
    teacher->add_option("--teacher-hidden", s.teacher_hidden);

    auto* soft = app.add_subcommand("soft-targets", "Cache teacher distributions for the training split");
    add_common(soft, s, config_path);
    soft->add_option("--teacher", s.teacher);
    soft->add_option("--data", s.data);
    soft->add_option("--temperature", s.temperature);

    auto* distill = app.add_subcommand("distill", "Train with encoding distillation or matching softmax");
    add_common(distill, s, config_path);
    add_protocol(distill, s);
    distill->add_option("--regime", s.regime, "encoding | matching");
    distill->add_option("--embeddings", s.embeddings, "Large pretrained table (encoding)");
    distill->add_option("--small-embeddings", s.small_embeddings, "Small pretrained table (matching)");
    distill->add_option("--teacher", s.teacher);
    distill->add_option("--soft-targets", s.soft_targets);
    distill->add_option("--temperature", s.temperature);
    distill->add_option("--n-distill", s.n_distill);
    distill->add_option("--n-embed", s.n_small_embed, "Random small table dimension (matching)");

    auto* fold = app.add_subcommand("fold", "Replace encoder + large table by the folded small table");
    add_common(fold, s, config_path);
    fold->add_option("--model", s.model);

    auto* eval = app.add_subcommand("eval", "Accuracy of a saved model on a prepared split");
    add_common(eval, s, config_path);
    eval->add_option("--model", s.model);
    eval->add_option("--data", s.data);
    eval->add_option("--split", s.split);

    auto* bench = app.add_subcommand("bench", "Median inference time of a small vs a large model");
    add_common(bench, s, config_path);
    bench->add_option("--small-model", s.small_model);
    bench->add_option("--large-model", s.large_model);
    bench->add_option("--data", s.data);
    bench->add_option("--split", s.split);
    bench->add_option("--reps", s.reps);

    auto* compare = app.add_subcommand("compare", "Accuracy / parameter / time comparison report");
    add_common(compare, s, config_path);
    compare->add_option("--results", s.results, "results.json files")->delimiter(',');
    compare->add_option("--bench", s.bench, "bench.json for the relative-time column");
    compare->add_option("--format", s.format, "tsv | text | both");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*prepare) return cmd_prepare(s, out);
        if (*train) return cmd_train(s, out);
        if (*teacher) return cmd_teacher(s, out);
        if (*soft) return cmd_soft_targets(s, out);
        if (*distill) return cmd_distill(s, out);
        if (*fold) return cmd_fold(s, out);
        if (*eval) return cmd_eval(s, out);
        if (*bench) return cmd_bench(s, out);
        if (*compare) return cmd_compare(s, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const ParameterError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const DivergenceError& e) {
        err << "numeric divergence: " << e.what() << "\n";
        return kDivergence;
    } catch (const Error& e) {
        err << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kFailure;
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

} // namespace edistill::cli
