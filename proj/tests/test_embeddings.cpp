// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "edistill/embeddings.hpp"
#include "test_util.hpp"

using namespace edistill;

namespace {

Vocabulary words(std::size_t n) {
    std::vector<std::string> w;
    for (std::size_t i = 0; i < n; ++i)
        w.push_back("t" + std::to_string(i));
    return Vocabulary(w);
}

} // namespace

TEST_CASE("Vocabulary") {
    const Vocabulary v({"a", "b"});
    CHECK(v.size() == 3);
    CHECK(v.unk_index() == 2);
    CHECK(v.word(2) == Vocabulary::kUnknownToken);
    CHECK(v.index_of("b") == 1);
    CHECK(v.index_of("zzz") == v.unk_index());
    CHECK(v.contains("a"));
    CHECK_FALSE(v.contains("zzz"));
    for (std::size_t i = 0; i < v.size(); ++i)
        CHECK(v.index_of(v.word(i)) == i);
    CHECK(Vocabulary().size() == 1);
    CHECK_THROWS_AS(Vocabulary({"a", "a"}), ConfigError);
    CHECK_THROWS_AS(Vocabulary({"<unk>"}), ConfigError);
    CHECK_THROWS_AS(v.word(3), IndexError);
}

TEST_CASE("lookup") {
    SUBCASE("hand-readable table") {
        EmbeddingTable<float> t{Vocabulary({"x"}), MatrixF{{1, 3}, {2, 4}}};
        CHECK(lookup(t, 1) == VectorF{{3, 4}});
        CHECK_THROWS_AS(lookup(t, 2), IndexError);
    }
    SUBCASE("equals the dense product with a one-hot vector") {
        Rng rng(1);
        const auto t = init_random_table<float>(words(99), 16, 1.0, rng);
        REQUIRE(t.size() == 100);
        for (std::size_t i = 0; i < t.size(); ++i) {
            const VectorF dense = t.matrix * one_hot<float>(t.size(), i);
            CHECK(lookup(t, i) == dense);
        }
    }
}

TEST_CASE("EncoderLayer construction") {
    Rng rng(3);
    CHECK_THROWS_AS(EncoderLayer<float>::init(5, 5, rng), ConfigError);
    CHECK_THROWS_AS(EncoderLayer<float>::init(0, 5, rng), ConfigError);
    CHECK_THROWS_AS(EncoderLayer<float>(MatrixF::Zero(2, 4), VectorF::Zero(3)), DimensionError);
    const auto enc = EncoderLayer<double>::init(50, 300, rng);
    const double bound = std::sqrt(6.0 / 350.0);
    CHECK(enc.weight.cwiseAbs().maxCoeff() <= bound);
    CHECK(enc.bias.isZero(0));
    CHECK(enc.bias.size() == 50);
}

TEST_CASE("encode") {
    Rng rng(4);
    const auto table = init_random_table<double>(words(9), 5, 1.0, rng);
    SUBCASE("zero layer gives the zero vector") {
        const EncoderLayer<double> enc(MatrixD::Zero(3, 5), VectorD::Zero(3));
        CHECK(encode(enc, table, 4).isZero(0));
    }
    SUBCASE("matches tanh(Wv + b)") {
        std::uniform_real_distribution<double> u(-1, 1);
        MatrixD w(3, 5);
        VectorD b(3);
        for (auto& x : w.reshaped())
            x = u(rng);
        for (auto& x : b)
            x = u(rng);
        const EncoderLayer<double> enc(w, b);
        for (std::size_t i = 0; i < table.size(); ++i) {
            const VectorD v = table.matrix.col(static_cast<Eigen::Index>(i));
            VectorD expect(3);
            for (int r = 0; r < 3; ++r) {
                double acc = b[r];
                for (int c = 0; c < 5; ++c)
                    acc += w(r, c) * v[c];
                expect[r] = std::tanh(acc);
            }
            CHECK((encode(enc, table, i) - expect).cwiseAbs().maxCoeff() < 1e-6);
        }
    }
    SUBCASE("dimension mismatch") {
        const auto enc = EncoderLayer<double>::init(2, 4, rng);
        CHECK_THROWS_AS(encode(enc, table, 0), DimensionError);
    }
}

TEST_CASE("fold") {
    Rng rng(5);
    const auto table = init_random_table<float>(words(999), 300, 0.5, rng);
    const auto enc = EncoderLayer<float>::init(50, 300, rng);
    const auto folded = fold(enc, table);
    CHECK(folded.table.matrix.rows() == 50);
    CHECK(folded.table.matrix.cols() == 1000);
    CHECK(folded.table.matrix.size() * 6 == table.matrix.size());
    CHECK(folded.table.vocab == table.vocab);
    for (std::size_t i = 0; i < table.size(); ++i)
        CHECK((lookup(folded.table, i) - encode(enc, table, i)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("init_random_table") {
    Rng a(11), b(11);
    const Vocabulary v = words(999);
    const auto ta = init_random_table<double>(v, 1000, 0.1, a);
    const auto tb = init_random_table<double>(v, 1000, 0.1, b);
    CHECK(ta.matrix == tb.matrix);
    CHECK(ta.matrix.cwiseAbs().maxCoeff() <= 0.1);
    // 10^6 draws uniform on [-1, 1]: std of the mean is about 5.8e-4.
    Rng c(12);
    const auto tc = init_random_table<double>(v, 1000, 1.0, c);
    CHECK(std::abs(tc.matrix.mean()) < 0.001 * 2);
    CHECK(std::abs(ta.matrix.mean()) < 0.001);
    Rng d(1);
    CHECK_THROWS_AS(init_random_table<float>(v, 3, 0.0, d), ParameterError);
}

TEST_CASE("word2vec text parsing") {
    SUBCASE("two-vector file") {
        const auto t = parse_word2vec_text("2 3\na 1 2 3\nb 4 5 6");
        CHECK(t.size() == 3);
        CHECK(t.dim() == 3);
        CHECK(t.vocab.word(0) == "a");
        CHECK(t.vocab.word(1) == "b");
        CHECK(t.vocab.unk_index() == 2);
        CHECK(lookup(t, 2) == VectorF{{2.5f, 3.5f, 4.5f}});
    }
    SUBCASE("trailing newline and CRLF are accepted") {
        CHECK(parse_word2vec_text("1 2\na 1 2\n").size() == 2);
        CHECK(parse_word2vec_text("1 2\r\na 1 2\r\n").size() == 2);
    }
    auto line_of = [](std::string_view text) -> std::size_t {
        try {
            parse_word2vec_text(text);
        } catch (const ParseError& e) {
            return e.location();
        }
        return 0;
    };
    SUBCASE("errors carry the line number") {
        CHECK(line_of("3 3\na 1 2 3\nb 4 5 6") != 0);     // count mismatch
        CHECK(line_of("2 3\na 1 2 3\nb 4 5") == 3);       // short row
        CHECK(line_of("2 3\na 1 2 3\nb 4 x 6") == 3);     // bad float
        CHECK(line_of("2 3\na 1 2 3\na 4 5 6") == 3);     // duplicate
        CHECK(line_of("two 3\na 1 2 3") == 1);            // header
        CHECK(line_of("2 3\na 1 2 3\nb 4 5 6 7") == 3);   // long row
    }
}

TEST_CASE("word2vec and native tables round-trip with f32 exactness") {
    testutil::TempDir dir;
    Rng rng(6);
    auto t = init_random_table<float>(words(49), 7, 3.0, rng);
    t.matrix(0, 0) = 1.0f / 3.0f;
    t.matrix(1, 1) = 1e-30f;
    t.matrix(2, 2) = -123456.789f;
    save_word2vec_text(t, dir / "v.txt");
    const auto back = load_word2vec_text(dir / "v.txt");
    // The unknown column is recomputed as the mean, so compare the word columns.
    REQUIRE(back.size() == t.size());
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        CHECK(back.vocab.word(i) == t.vocab.word(i));
        CHECK(lookup(back, i) == lookup(t, i));
    }
    save_table(back, dir / "v.emb");
    const auto native = load_table(dir / "v.emb");
    CHECK(native.vocab == back.vocab);
    CHECK(native.matrix == back.matrix);
    CHECK(load_any_table(dir / "v.emb").matrix == back.matrix);
    CHECK(load_any_table(dir / "v.txt").matrix == back.matrix);

    const std::string bytes = testutil::slurp(dir / "v.emb");
    testutil::write(dir / "cut.emb", bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(load_table(dir / "cut.emb"), FormatError);
    CHECK_THROWS_AS(load_word2vec_text(dir / "missing.txt"), IoError);
}

TEST_CASE("align_table") {
    const auto pre = parse_word2vec_text("3 2\na 1 2\nb 3 4\nc 5 6\n");
    const Vocabulary task({"c", "z", "a"});
    Rng rng(2);
    const auto t = align_table(pre, task, rng);
    CHECK(t.vocab == task);
    CHECK(lookup(t, 0) == VectorF{{5, 6}});
    CHECK(lookup(t, 2) == VectorF{{1, 2}});
    CHECK(lookup(t, task.unk_index()) == lookup(pre, pre.vocab.unk_index()));
    CHECK(lookup(t, 1).cwiseAbs().maxCoeff() <= 0.1f);
}
