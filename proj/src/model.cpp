// SPDX-License-Identifier: Apache-2.0

#include "edistill/model.hpp"

#include <bit>

#include "edistill/binary_io.hpp"

namespace edistill {

namespace {

constexpr std::string_view kModelMagic = "MDL1";
constexpr std::uint32_t kModelVersion = 1;

std::string describe(const ModelConfig& c) {
    return "vocab=" + std::to_string(c.vocab_size) + " embed=" + std::to_string(c.n_embed) +
           " distill=" + std::to_string(c.n_distill) + " hidden=" + std::to_string(c.n_hidden) +
           " classes=" + std::to_string(c.n_classes) + " regime=" + std::string(regime_name(c.regime)) +
           " dropout=" + std::to_string(c.dropout_rate);
}

} // namespace

std::string_view regime_name(Regime r) {
    switch (r) {
    case Regime::direct:
        return "direct";
    case Regime::encoding:
        return "encoding";
    case Regime::matching_softmax:
        return "matching_softmax";
    }
    return "?";
}

Regime parse_regime(std::string_view name) {
    if (name == "direct" || name == "direct_small")
        return Regime::direct;
    if (name == "encoding" || name == "encoding_distill")
        return Regime::encoding;
    if (name == "matching" || name == "matching_softmax")
        return Regime::matching_softmax;
    throw ConfigError("unknown regime \"" + std::string(name) + "\"");
}

void ModelConfig::validate() const {
    if (vocab_size == 0 || n_embed == 0 || n_hidden == 0 || n_classes == 0)
        throw ConfigError("ModelConfig: all dimensions must be >= 1 (" + describe(*this) + ")");
    if (!(dropout_rate >= 0.0f && dropout_rate < 1.0f))
        throw ConfigError("ModelConfig: dropout must be in [0, 1), got " + std::to_string(dropout_rate));
    if (n_distill != 0 && n_distill >= n_embed)
        throw ConfigError("ModelConfig: need n_distill < n_embed, got " + std::to_string(n_distill) +
                          " >= " + std::to_string(n_embed));
    if (activation != "tanh")
        throw ConfigError("ModelConfig: unsupported activation \"" + activation + "\"");
}

std::size_t count_parameters(const ModelConfig& c) {
    std::size_t n = c.vocab_size * c.n_embed;
    if (c.n_distill)
        n += c.n_distill * c.n_embed + c.n_distill;
    n += c.n_hidden * c.word_dim() + c.n_hidden;
    n += c.n_classes * c.n_hidden + c.n_classes;
    return n;
}

std::string serialize_model(const ClassifierModel<float>& m) {
    m.validate();
    io::ByteWriter w;
    w.magic(kModelMagic);
    w.u32(kModelVersion);
    const auto& c = m.config;
    for (auto d : {c.vocab_size, c.n_embed, c.n_distill, c.n_hidden, c.n_classes})
        w.u32(io::ByteWriter::checked_u32(d));
    w.u8(static_cast<std::uint8_t>(c.regime));
    w.f32(c.dropout_rate);
    w.u32(io::ByteWriter::checked_u32(m.embedding.vocab.unk_index()));
    for (const auto& word : m.embedding.vocab.words())
        w.str(word);
    w.floats(m.embedding.matrix);
    if (m.encoder) {
        w.floats(m.encoder->weight);
        w.floats(m.encoder->bias);
    }
    w.floats(m.w_hidden);
    w.floats(m.b_hidden);
    w.floats(m.w_out);
    w.floats(m.b_out);
    return w.bytes();
}

void save_model(const ClassifierModel<float>& m, const std::filesystem::path& path) {
    io::write_file_atomic(path, serialize_model(m));
}

ClassifierModel<float> load_model(const std::filesystem::path& path, const ModelConfig* expected) {
    io::ByteReader r(io::read_file(path), path.string());
    r.expect_magic(kModelMagic);
    const std::uint32_t version = r.u32();
    if (version != kModelVersion)
        throw FormatError(path.string() + ": unsupported model version " + std::to_string(version));
    ClassifierModel<float> m;
    auto& c = m.config;
    c.vocab_size = r.u32();
    c.n_embed = r.u32();
    c.n_distill = r.u32();
    c.n_hidden = r.u32();
    c.n_classes = r.u32();
    const std::uint8_t regime = r.u8();
    if (regime > static_cast<std::uint8_t>(Regime::matching_softmax))
        throw FormatError(path.string() + ": unknown regime tag " + std::to_string(regime));
    c.regime = static_cast<Regime>(regime);
    c.dropout_rate = r.f32();
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    if (expected && !(*expected == c))
        throw ConfigError(path.string() + ": stored config (" + describe(c) +
                          ") does not match the expected one (" + describe(*expected) + ")");
    // Guard allocations against corrupt headers before reading parameters.
    if (static_cast<double>(count_parameters(c)) * 4.0 > static_cast<double>(r.remaining()))
        throw FormatError(path.string() + ": truncated (config needs more parameters than stored)");

    const std::uint32_t unk = r.u32();
    std::vector<std::string> words;
    words.reserve(c.vocab_size);
    for (std::size_t i = 0; i < c.vocab_size; ++i)
        words.push_back(r.str());
    m.embedding.vocab = Vocabulary::from_stored(std::move(words), unk);

    auto read_matrix = [&r](std::size_t rows, std::size_t cols) {
        MatrixF x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        r.floats(x);
        return x;
    };
    auto read_vector = [&r](std::size_t n) {
        VectorF x(static_cast<Eigen::Index>(n));
        r.floats(x);
        return x;
    };
    m.embedding.matrix = read_matrix(c.n_embed, c.vocab_size);
    if (c.n_distill) {
        auto weight = read_matrix(c.n_distill, c.n_embed);
        m.encoder = EncoderLayer<float>(std::move(weight), read_vector(c.n_distill));
    }
    m.w_hidden = read_matrix(c.n_hidden, c.word_dim());
    m.b_hidden = read_vector(c.n_hidden);
    m.w_out = read_matrix(c.n_classes, c.n_hidden);
    m.b_out = read_vector(c.n_classes);
    r.expect_end();
    m.validate();
    return m;
}

std::uint64_t parameter_hash(const ClassifierModel<float>& m) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const auto& block) {
        for (Eigen::Index i = 0; i < block.size(); ++i) {
            std::uint32_t bits = std::bit_cast<std::uint32_t>(block.data()[i]);
            for (int b = 0; b < 4; ++b) {
                h ^= (bits >> (8 * b)) & 0xffu;
                h *= 1099511628211ull;
            }
        }
    };
    mix(m.embedding.matrix);
    if (m.encoder) {
        mix(m.encoder->weight);
        mix(m.encoder->bias);
    }
    mix(m.w_hidden);
    mix(m.b_hidden);
    mix(m.w_out);
    mix(m.b_out);
    return h;
}

} // namespace edistill
