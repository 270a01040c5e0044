// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "corpus.hpp"
#include "edistill/cli.hpp"
#include "edistill/distillation.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace edistill;
using testutil::slurp;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

// Quick protocol flags shared by the training commands.
std::vector<std::string> quick(std::vector<std::string> args) {
    for (const char* a : {"--lr", "0.5,0.1", "--decay", "constant", "--dropout", "0", "--seeds", "1,2,3",
                          "--epochs", "3", "--batch-size", "20"})
        args.emplace_back(a);
    return args;
}

/// One prepared corpus shared by the end-to-end cases.
struct Fixture {
    testutil::TempDir dir;
    fs::path data;

    Fixture() {
        testutil::write_corpus(dir / "train.txt", 150, 60, 1);
        testutil::write_corpus(dir / "valid.txt", 40, 60, 2);
        testutil::write_corpus(dir / "test.txt", 40, 60, 3);
        testutil::write_vectors(dir / "large.txt", 50, 24, 4);
        testutil::write_vectors(dir / "small.txt", 50, 6, 5);
        data = dir / "prepared";
        const auto r = run({"prepare", "--train", (dir / "train.txt").string(), "--valid",
                            (dir / "valid.txt").string(), "--test", (dir / "test.txt").string(), "--out",
                            data.string()});
        REQUIRE(r.code == 0);
    }
    std::string p(const std::string& name) const { return (dir / name).string(); }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

} // namespace

TEST_CASE("prepare") {
    testutil::TempDir dir;
    testutil::write(dir / "train.txt", "(3 (2 A) (4 B))\n(1 (2 (3 a) (4 b)) (0 (1 c) (2 d)))\n(0 Z)\n");
    testutil::write(dir / "valid.txt", "(2 (1 A) (3 q))\n");
    testutil::write(dir / "test.txt", "(4 (1 b) (3 c))\n(0 d)\n");
    auto prepare = [&](const std::string& out, const std::string& train) {
        return run({"prepare", "--train", (dir / train).string(), "--valid", (dir / "valid.txt").string(),
                    "--test", (dir / "test.txt").string(), "--out", (dir / out).string()});
    };
    const auto r = prepare("p1", "train.txt");
    REQUIRE(r.code == 0);
    CHECK(r.err.empty());
    CHECK(r.out.find("train\t3\t11\n") != std::string::npos);
    CHECK(r.out.find("valid\t1\t3\n") != std::string::npos);
    CHECK(r.out.find("test\t2\t4\n") != std::string::npos);
    CHECK(load_prepared(dir / "p1").train.size() == 11);

    const auto again = prepare("p2", "train.txt");
    REQUIRE(again.code == 0);
    for (const char* f : {"vocab.bin", "train.spl", "valid.spl", "test.spl"})
        CHECK(slurp(dir / "p1" / f) == slurp(dir / "p2" / f));

    SUBCASE("sentence-only training samples") {
        const auto s = run({"prepare", "--train", (dir / "train.txt").string(), "--valid",
                            (dir / "valid.txt").string(), "--test", (dir / "test.txt").string(), "--out",
                            (dir / "p3").string(), "--phrases", "sentence"});
        REQUIRE(s.code == 0);
        CHECK(load_prepared(dir / "p3").train.size() == 3);
    }
    SUBCASE("a corrupt line fails without leaving a cache") {
        testutil::write(dir / "bad.txt", "(3 (2 A) (4 B))\n(1 (2 x)\n");
        const auto bad = prepare("p4", "bad.txt");
        CHECK(bad.code == cli::kDataError);
        CHECK(bad.err.find("bad.txt:2") != std::string::npos);
        CHECK_FALSE(fs::exists(dir / "p4"));
        CHECK_FALSE(fs::exists(dir / "p4.partial"));
    }
    SUBCASE("a failed rerun keeps the previous output") {
        testutil::write(dir / "bad.txt", "(3 (2 A) (4 B)\n");
        CHECK(prepare("p1", "bad.txt").code == cli::kDataError);
        CHECK(load_prepared(dir / "p1").train.size() == 11);
    }
}

TEST_CASE("exit codes") {
    auto& f = fixture();
    CHECK(run({}).code == cli::kConfigError);
    CHECK(run({"frobnicate"}).code == cli::kConfigError);
    CHECK(run({"eval", "--no-such-flag"}).code == cli::kConfigError);
    CHECK(run({"eval", "--model", f.p("missing.mdl"), "--data", f.data.string()}).code == cli::kDataError);
    CHECK(run({"train", "--data", f.data.string()}).code == cli::kConfigError); // no --out
    CHECK(run(quick({"train", "--data", f.data.string(), "--out", f.p("x"), "--decay", "cosine"})).code ==
          cli::kConfigError);
    const auto div = run({"train", "--data", f.data.string(), "--out", f.p("div"), "--lr", "1e38", "--decay",
                          "constant", "--dropout", "0", "--epochs", "4", "--seeds", "1"});
    CHECK(div.code == cli::kDivergence);
    CHECK(div.err.find("diverged") != std::string::npos);
    CHECK_FALSE(fs::exists(f.dir / "div"));
    const auto help = run({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("distill") != std::string::npos);
    CHECK(run({"--version"}).out.find(cli::version()) != std::string::npos);
}

TEST_CASE("config files") {
    auto& f = fixture();
    cli::RunSpec s;
    cli::apply_config_json(R"({"seed": 9, "lrs": [0.3], "decay_schemes": ["inverse"], "out": "x"})", s);
    CHECK(s.seed == 9);
    CHECK(s.lrs == std::vector<double>{0.3});
    CHECK(s.decay_schemes == std::vector<std::string>{"inverse"});
    CHECK_THROWS_AS(cli::apply_config_json(R"({"sed": 1})", s), ConfigError);
    CHECK_THROWS_AS(cli::apply_config_json(R"({"seed": "one"})", s), ConfigError);
    CHECK_THROWS_AS(cli::apply_config_json("[1, 2]", s), ConfigError);

    const nlohmann::json cfg{{"data", f.data.string()}, {"lrs", {0.5}}, {"decay_schemes", {"constant"}},
                             {"dropouts", {0.0}}, {"seeds", {1, 2}}, {"max_epochs", 2}, {"batch_size", 20},
                             {"out", f.p("from_config")}};
    testutil::write(f.dir / "run.json", cfg.dump());
    const auto r = run({"train", "--config", f.p("run.json"), "--out", f.p("from_flag")});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(f.dir / "from_flag" / "model.mdl"));
    CHECK_FALSE(fs::exists(f.dir / "from_config"));
    const auto j = nlohmann::json::parse(slurp(f.dir / "from_flag" / "results.json"));
    CHECK(j["seeds"] == nlohmann::json({1, 2}));
    testutil::write(f.dir / "bad.json", R"({"learning_rate": 1})");
    CHECK(run({"train", "--config", f.p("bad.json")}).code == cli::kConfigError);
}

TEST_CASE("train with lr 0 leaves the model at its initialisation") {
    auto& f = fixture();
    const auto r = run({"train", "--data", f.data.string(), "--out", f.p("lr0"), "--lr", "0", "--decay", "constant",
                        "--dropout", "0", "--seeds", "4", "--epochs", "2", "--seed", "4"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("warning: learning rate 0") != std::string::npos);
    CHECK(r.err.empty());
    const auto splits = load_prepared(f.data);
    Protocol p;
    const auto init = regime_factory({Regime::direct}, splits.vocab, {}, p)(4);
    CHECK(parameter_hash(load_model(f.dir / "lr0" / "model.mdl")) == parameter_hash(init));
}

TEST_CASE("train, distill, fold, eval") {
    auto& f = fixture();
    const auto train = run(quick({"train", "--data", f.data.string(), "--embeddings", f.p("small.txt"), "--out",
                                  f.p("direct")}));
    REQUIRE(train.code == 0);
    CHECK(train.err.empty());
    CHECK(train.out.find("regime\tdirect") != std::string::npos);
    for (const char* name : {"model.mdl", "deployed.mdl", "results.json", "logs"})
        CHECK(fs::exists(f.dir / "direct" / name));
    CHECK(load_model(f.dir / "direct" / "model.mdl").config.n_embed == 6);
    const auto results = nlohmann::json::parse(slurp(f.dir / "direct" / "results.json"));
    CHECK(results["per_seed"].size() == 3);
    CHECK(results["regime"] == "direct");
    CHECK(results.contains("version"));

    const auto enc = run(quick({"distill", "--regime", "encoding", "--data", f.data.string(), "--embeddings",
                                f.p("large.txt"), "--n-distill", "5", "--out", f.p("enc")}));
    REQUIRE(enc.code == 0);
    const auto trained = load_model(f.dir / "enc" / "model.mdl");
    CHECK(trained.encoder.has_value());
    CHECK(trained.config.n_distill == 5);

    const auto fold = run({"fold", "--model", f.p("enc/model.mdl"), "--out", f.p("folded")});
    REQUIRE(fold.code == 0);
    CHECK(slurp(f.dir / "folded" / "folded.mdl") == slurp(f.dir / "enc" / "deployed.mdl"));

    auto eval = [&](const std::string& model, const std::string& split) {
        return run({"eval", "--model", f.p(model), "--data", f.data.string(), "--split", split});
    };
    for (const char* split : {"train", "valid", "test"}) {
        const auto a = eval("enc/model.mdl", split);
        const auto b = eval("folded/folded.mdl", split);
        REQUIRE(a.code == 0);
        CHECK(a.out == b.out);
        CHECK(eval("enc/model.mdl", split).out == a.out);
        CHECK(a.out.find("accuracy\t") != std::string::npos);
    }
    CHECK(eval("enc/model.mdl", "dev").code == cli::kConfigError);
}

TEST_CASE("teacher, soft targets, matching softmax") {
    auto& f = fixture();
    const auto t = run(quick({"teacher", "--data", f.data.string(), "--embeddings", f.p("large.txt"),
                              "--teacher-hidden", "12", "--out", f.p("teacher")}));
    REQUIRE(t.code == 0);
    CHECK(t.err.empty());
    const auto teacher = load_model(f.dir / "teacher" / "teacher.mdl");
    CHECK(teacher.config.n_hidden == 12);
    CHECK(fs::exists(f.dir / "teacher" / "teacher.json"));

    const auto s = run({"soft-targets", "--teacher", f.p("teacher/teacher.mdl"), "--data", f.data.string(),
                        "--temperature", "2", "--out", f.p("soft")});
    REQUIRE(s.code == 0);
    const auto targets = load_soft_targets(f.dir / "soft" / "soft_targets.sft");
    CHECK(targets.size() == load_prepared(f.data).train.size());
    CHECK(targets.temperature == 2.0f);

    const auto m = run(quick({"distill", "--regime", "matching", "--data", f.data.string(), "--soft-targets",
                              f.p("soft/soft_targets.sft"), "--out", f.p("match")}));
    REQUIRE(m.code == 0);
    const auto mj = nlohmann::json::parse(slurp(f.dir / "match" / "results.json"));
    CHECK(mj["regime"] == "matching_softmax");
    CHECK(mj["temperature"] == 2.0);

    const auto via_teacher = run(quick({"distill", "--regime", "matching", "--data", f.data.string(), "--teacher",
                                        f.p("teacher/teacher.mdl"), "--out", f.p("match2")}));
    REQUIRE(via_teacher.code == 0);
    CHECK(slurp(f.dir / "match" / "model.mdl") == slurp(f.dir / "match2" / "model.mdl"));
    CHECK(parameter_hash(load_model(f.dir / "teacher" / "teacher.mdl")) == parameter_hash(teacher));

    CHECK(run(quick({"distill", "--regime", "matching", "--data", f.data.string(), "--soft-targets",
                     f.p("soft/soft_targets.sft"), "--temperature", "3", "--out", f.p("m3")}))
              .code == cli::kConfigError);
    CHECK(run(quick({"distill", "--regime", "matching", "--data", f.data.string(), "--out", f.p("m4")})).code ==
          cli::kConfigError);
}

TEST_CASE("determinism of every command") {
    auto& f = fixture();
    for (const char* out : {"det1", "det2"}) {
        REQUIRE(run(quick({"distill", "--regime", "encoding", "--data", f.data.string(), "--embeddings",
                           f.p("large.txt"), "--n-distill", "5", "--out", f.p(out), "--jobs", "2"}))
                    .code == 0);
    }
    for (const char* name : {"model.mdl", "deployed.mdl", "results.json"})
        CHECK(slurp(f.dir / "det1" / name) == slurp(f.dir / "det2" / name));
}

TEST_CASE("bench") {
    auto& f = fixture();
    testutil::write_corpus(f.dir / "bench_train.txt", 400, 200, 7);
    testutil::write_vectors(f.dir / "big.txt", 200, 300, 8);
    REQUIRE(run({"prepare", "--train", f.p("bench_train.txt"), "--valid", f.p("valid.txt"), "--test",
                 f.p("bench_train.txt"), "--out", f.p("bench_data")})
                .code == 0);
    const std::string bench_data = f.p("bench_data");
    REQUIRE(run({"teacher", "--data", bench_data, "--embeddings", f.p("big.txt"), "--teacher-hidden", "200", "--lr",
                 "0.1", "--decay", "constant", "--dropout", "0", "--epochs", "1", "--out", f.p("big_teacher")})
                .code == 0);
    REQUIRE(run({"distill", "--regime", "encoding", "--data", bench_data, "--embeddings", f.p("big.txt"), "--lr",
                 "0.1", "--decay", "constant", "--dropout", "0", "--epochs", "1", "--seeds", "1", "--out",
                 f.p("big_enc")})
                .code == 0);
    const std::string large = f.p("big_teacher/teacher.mdl");
    const std::string small = f.p("big_enc/deployed.mdl");

    auto ratio_of = [](const std::string& out) {
        const auto pos = out.find("relative_time\t");
        REQUIRE(pos != std::string::npos);
        return std::stod(out.substr(pos + 14));
    };
    const auto self = run({"bench", "--small-model", large, "--large-model", large, "--data", bench_data, "--reps", "10"});
    REQUIRE(self.code == 0);
    CHECK(ratio_of(self.out) >= 0.9);
    CHECK(ratio_of(self.out) <= 1.1);

    const auto a = run({"bench", "--small-model", small, "--large-model", large, "--data", bench_data, "--reps", "10",
                        "--out", f.p("bench1")});
    const auto b = run({"bench", "--small-model", small, "--large-model", large, "--data", bench_data, "--reps", "10"});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(a.err.empty());
    CHECK(ratio_of(a.out) < 1.0);
    CHECK(std::abs(ratio_of(a.out) - ratio_of(b.out)) <= 0.2 * std::max(ratio_of(a.out), ratio_of(b.out)));
    const auto bj = nlohmann::json::parse(slurp(f.dir / "bench1" / "bench.json"));
    CHECK(bj["reps"] == 10);
    CHECK(bj["relative_time"].get<double>() < 1.0);

    CHECK(run({"bench", "--small-model", small, "--large-model", large, "--data", bench_data, "--reps", "2"}).code ==
          cli::kConfigError);
}

TEST_CASE("compare") {
    auto& f = fixture();
    REQUIRE(run(quick({"train", "--data", f.data.string(), "--out", f.p("c_direct")})).code == 0);
    REQUIRE(run(quick({"distill", "--regime", "encoding", "--data", f.data.string(), "--embeddings", f.p("large.txt"),
                       "--n-distill", "5", "--out", f.p("c_enc")}))
                .code == 0);
    REQUIRE(run(quick({"teacher", "--data", f.data.string(), "--embeddings", f.p("large.txt"), "--teacher-hidden", "12",
                       "--out", f.p("c_teacher")}))
                .code == 0);
    REQUIRE(run(quick({"distill", "--regime", "matching", "--data", f.data.string(), "--teacher",
                       f.p("c_teacher/teacher.mdl"), "--out", f.p("c_match")}))
                .code == 0);
    testutil::write(f.dir / "bench.json", R"({"relative_time": 0.04})");

    const std::string results =
        f.p("c_direct/results.json") + "," + f.p("c_match/results.json") + "," + f.p("c_enc/results.json");
    const auto r = run({"compare", "--results", results, "--bench", f.p("bench.json"), "--out", f.p("report")});
    REQUIRE(r.code == 0);
    CHECK(r.err.empty());
    const std::string tsv = slurp(f.dir / "report" / "report.tsv");
    const std::string txt = slurp(f.dir / "report" / "report.txt");
    CHECK(r.out == txt);
    CHECK(tsv.find("MISSING") == std::string::npos);
    CHECK(txt.find("Training a small network") != std::string::npos);
    CHECK(txt.find("Matching softmax") != std::string::npos);
    CHECK(txt.find("Encoding distillation") != std::string::npos);
    CHECK(txt.find("0.04x") != std::string::npos);
    CHECK(txt.find(" ± ") != std::string::npos);
    for (const char* key : {"# version", ".seeds", ".learning_rates", ".decay_schemes", ".dropouts"})
        CHECK(tsv.find(key) != std::string::npos);

    const auto again = run({"compare", "--results", results, "--bench", f.p("bench.json"), "--out", f.p("report2")});
    REQUIRE(again.code == 0);
    CHECK(slurp(f.dir / "report2" / "report.tsv") == tsv);
    CHECK(slurp(f.dir / "report2" / "report.txt") == txt);

    const auto one = run({"compare", "--results", f.p("c_enc/results.json"), "--format", "tsv", "--out", f.p("report3")});
    REQUIRE(one.code == 0);
    CHECK(fs::exists(f.dir / "report3" / "report.tsv"));
    CHECK_FALSE(fs::exists(f.dir / "report3" / "report.txt"));
    const std::string one_tsv = slurp(f.dir / "report3" / "report.tsv");
    std::size_t missing = 0;
    for (auto pos = one_tsv.find("MISSING"); pos != std::string::npos; pos = one_tsv.find("MISSING", pos + 1))
        ++missing;
    CHECK(missing == 2 * 4);

    CHECK(run({"compare", "--results", f.p("c_enc/results.json") + "," + f.p("c_enc/results.json")}).code ==
          cli::kConfigError);
}
