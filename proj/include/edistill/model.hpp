// SPDX-License-Identifier: Apache-2.0
//
// Sentence classifier: word vectors (optionally passed through an encoder)
// -> mean pooling -> tanh hidden layer -> dropout -> temperature softmax.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "edistill/core_math.hpp"
#include "edistill/embeddings.hpp"

namespace edistill {

enum class Regime : std::uint8_t { direct = 0, encoding = 1, matching_softmax = 2 };

std::string_view regime_name(Regime r);
Regime parse_regime(std::string_view name);

struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t n_embed = 0;
    std::size_t n_distill = 0; // 0 = no encoder
    std::size_t n_hidden = 0;
    std::size_t n_classes = 0;
    float dropout_rate = 0.0f;
    std::string activation = "tanh";
    Regime regime = Regime::direct;

    /// Dimension of the vectors that get pooled.
    std::size_t word_dim() const noexcept { return n_distill ? n_distill : n_embed; }
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename Scalar>
struct ClassifierModel {
    ModelConfig config;
    EmbeddingTable<Scalar> embedding;
    std::optional<EncoderLayer<Scalar>> encoder;
    Matrix<Scalar> w_hidden; // n_hidden x word_dim
    Vector<Scalar> b_hidden;
    Matrix<Scalar> w_out; // n_classes x n_hidden
    Vector<Scalar> b_out;
    // Bumped by every parameter update; forward caches remember it.
    std::uint64_t generation = 0;

    /// Glorot-uniform weights, zero biases. `table` supplies Φ (or the small
    /// table for direct models); an encoder is created when n_distill > 0.
    static ClassifierModel init(ModelConfig cfg, EmbeddingTable<Scalar> table, Rng& rng) {
        cfg.vocab_size = table.size();
        cfg.validate();
        if (table.dim() != cfg.n_embed)
            throw DimensionError("ClassifierModel: table has dim " + std::to_string(table.dim()) +
                                 ", config says n_embed=" + std::to_string(cfg.n_embed));
        ClassifierModel m;
        m.config = cfg;
        m.embedding = std::move(table);
        if (cfg.n_distill)
            m.encoder = EncoderLayer<Scalar>::init(cfg.n_distill, cfg.n_embed, rng);
        m.w_hidden = glorot(cfg.n_hidden, cfg.word_dim(), rng);
        m.b_hidden = Vector<Scalar>::Zero(static_cast<Eigen::Index>(cfg.n_hidden));
        m.w_out = glorot(cfg.n_classes, cfg.n_hidden, rng);
        m.b_out = Vector<Scalar>::Zero(static_cast<Eigen::Index>(cfg.n_classes));
        return m;
    }

    void validate() const {
        config.validate();
        const auto dim = static_cast<Eigen::Index>(config.word_dim());
        const auto nh = static_cast<Eigen::Index>(config.n_hidden);
        const auto nc = static_cast<Eigen::Index>(config.n_classes);
        bool ok = embedding.size() == config.vocab_size && embedding.dim() == config.n_embed &&
                  encoder.has_value() == (config.n_distill != 0) && w_hidden.rows() == nh &&
                  w_hidden.cols() == dim && b_hidden.size() == nh && w_out.rows() == nc &&
                  w_out.cols() == nh && b_out.size() == nc;
        if (encoder)
            ok = ok && encoder->n_distill() == config.n_distill && encoder->n_embed() == config.n_embed &&
                 encoder->bias.size() == static_cast<Eigen::Index>(config.n_distill);
        if (!ok)
            throw DimensionError("ClassifierModel: parameter shapes do not match the config");
    }

    template <typename Other>
    ClassifierModel<Other> cast() const {
        ClassifierModel<Other> m;
        m.config = config;
        m.embedding = embedding.template cast<Other>();
        if (encoder)
            m.encoder = encoder->template cast<Other>();
        m.w_hidden = w_hidden.template cast<Other>();
        m.b_hidden = b_hidden.template cast<Other>();
        m.w_out = w_out.template cast<Other>();
        m.b_out = b_out.template cast<Other>();
        return m;
    }

    static Matrix<Scalar> glorot(std::size_t fan_out, std::size_t fan_in, Rng& rng) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> u(-bound, bound);
        Matrix<Scalar> w(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in));
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i)
                w(i, j) = static_cast<Scalar>(u(rng));
        return w;
    }
};

template <typename Scalar>
struct ForwardCache {
    std::vector<std::size_t> tokens;
    Matrix<Scalar> inputs;       // table columns, n_embed x L (encoder models only)
    Matrix<Scalar> word_vectors; // word_dim x L
    Vector<Scalar> pool;
    Vector<Scalar> hidden; // tanh output, before dropout
    Vector<Scalar> mask;
    Vector<Scalar> logits;
    std::uint64_t generation = 0;
};

template <typename Scalar>
struct ForwardResult {
    Vector<Scalar> y;
    ForwardCache<Scalar> cache;
};

/// Sparse over Φ columns, dense elsewhere.
template <typename Scalar>
struct Gradients {
    std::map<std::size_t, Vector<Scalar>> table_columns;
    Matrix<Scalar> w_encode;
    Vector<Scalar> b_encode;
    Matrix<Scalar> w_hidden;
    Vector<Scalar> b_hidden;
    Matrix<Scalar> w_out;
    Vector<Scalar> b_out;

    static Gradients zeros_like(const ClassifierModel<Scalar>& m) {
        Gradients g;
        if (m.encoder) {
            g.w_encode = Matrix<Scalar>::Zero(m.encoder->weight.rows(), m.encoder->weight.cols());
            g.b_encode = Vector<Scalar>::Zero(m.encoder->bias.size());
        }
        g.w_hidden = Matrix<Scalar>::Zero(m.w_hidden.rows(), m.w_hidden.cols());
        g.b_hidden = Vector<Scalar>::Zero(m.b_hidden.size());
        g.w_out = Matrix<Scalar>::Zero(m.w_out.rows(), m.w_out.cols());
        g.b_out = Vector<Scalar>::Zero(m.b_out.size());
        return g;
    }

    void set_zero() {
        table_columns.clear();
        w_encode.setZero();
        b_encode.setZero();
        w_hidden.setZero();
        b_hidden.setZero();
        w_out.setZero();
        b_out.setZero();
    }

    Gradients& operator*=(Scalar s) {
        for (auto& [_, col] : table_columns)
            col *= s;
        w_encode *= s;
        b_encode *= s;
        w_hidden *= s;
        b_hidden *= s;
        w_out *= s;
        b_out *= s;
        return *this;
    }
};

/// Calls f(name, param, grad) for every dense parameter block, each viewed as
/// a flat vector. Φ is sparse and handled separately.
template <typename Scalar, typename F>
void for_each_dense_block(ClassifierModel<Scalar>& m, Gradients<Scalar>& g, F&& f) {
    using Flat = Eigen::Map<Vector<Scalar>>;
    auto visit = [&](std::string_view name, auto& p, auto& d) {
        f(name, Flat(p.data(), p.size()), Flat(d.data(), d.size()));
    };
    if (m.encoder) {
        visit("w_encode", m.encoder->weight, g.w_encode);
        visit("b_encode", m.encoder->bias, g.b_encode);
    }
    visit("w_hidden", m.w_hidden, g.w_hidden);
    visit("b_hidden", m.b_hidden, g.b_hidden);
    visit("w_out", m.w_out, g.w_out);
    visit("b_out", m.b_out, g.b_out);
}

/// Runs the classifier on one token sequence. Dropout is drawn from `rng`
/// only when `train_mode` is set and the rate is non-zero.
template <typename Scalar>
ForwardResult<Scalar> forward(const ClassifierModel<Scalar>& m, std::span<const std::size_t> tokens,
                              double temperature, bool train_mode, Rng& rng) {
    if (tokens.empty())
        throw ParameterError("forward: empty sample");
    ForwardCache<Scalar> c;
    c.tokens.assign(tokens.begin(), tokens.end());
    c.generation = m.generation;
    const auto len = static_cast<Eigen::Index>(tokens.size());

    Matrix<Scalar> gathered(static_cast<Eigen::Index>(m.embedding.dim()), len);
    for (Eigen::Index k = 0; k < len; ++k) {
        const auto w = tokens[static_cast<std::size_t>(k)];
        if (w >= m.embedding.size())
            throw IndexError("forward: token " + std::to_string(w) + " outside vocabulary of " +
                             std::to_string(m.embedding.size()));
        gathered.col(k) = m.embedding.matrix.col(static_cast<Eigen::Index>(w));
    }
    if (m.encoder) {
        Matrix<Scalar> pre = m.encoder->weight * gathered;
        pre.colwise() += m.encoder->bias;
        c.word_vectors = tanh_forward(pre);
        c.inputs = std::move(gathered);
    } else {
        c.word_vectors = std::move(gathered);
    }
    c.pool = c.word_vectors.rowwise().mean();
    c.hidden = tanh_forward(affine_forward(m.w_hidden, c.pool, m.b_hidden));
    if (train_mode && m.config.dropout_rate > 0.0f)
        c.mask = dropout_mask<Scalar>(m.config.n_hidden, m.config.dropout_rate, rng);
    else
        c.mask = Vector<Scalar>::Ones(c.hidden.size());
    c.logits = affine_forward(m.w_out, Vector<Scalar>(c.hidden.cwiseProduct(c.mask)), m.b_out);
    Vector<Scalar> y = softmax_t(c.logits, temperature);
    return {std::move(y), std::move(c)};
}

/// Eval-mode logits (no dropout).
template <typename Scalar>
Vector<Scalar> logits(const ClassifierModel<Scalar>& m, std::span<const std::size_t> tokens) {
    Rng unused(0);
    return forward(m, tokens, 1.0, false, unused).cache.logits;
}

template <typename Scalar>
std::size_t predict(const ClassifierModel<Scalar>& m, std::span<const std::size_t> tokens) {
    return argmax(logits(m, tokens));
}

/// Accumulates into `acc` the gradient of a scalar loss whose derivative
/// with respect to the logits is `dlogits`.
template <typename Scalar>
void backward_logits(const ClassifierModel<Scalar>& m, const ForwardCache<Scalar>& c,
                     const Vector<Scalar>& dlogits, Gradients<Scalar>& acc) {
    if (c.generation != m.generation)
        throw ContractError("backward: forward cache is stale (model generation " +
                            std::to_string(m.generation) + ", cache " +
                            std::to_string(c.generation) + ")");
    if (dlogits.size() != m.b_out.size())
        throw DimensionError("backward: dlogits has dim " + std::to_string(dlogits.size()));

    const Vector<Scalar> dropped = c.hidden.cwiseProduct(c.mask);
    const auto out = affine_backward(m.w_out, dropped, m.b_out, dlogits);
    acc.w_out += out.w;
    acc.b_out += out.b;

    const Vector<Scalar> dpre_hidden = tanh_backward(c.hidden, Vector<Scalar>(out.x.cwiseProduct(c.mask)));
    const auto hid = affine_backward(m.w_hidden, c.pool, m.b_hidden, dpre_hidden);
    acc.w_hidden += hid.w;
    acc.b_hidden += hid.b;

    const auto len = static_cast<Eigen::Index>(c.tokens.size());
    const Vector<Scalar> dword = hid.x / static_cast<Scalar>(len);
    auto scatter = [&](std::size_t word, const auto& col) {
        auto it = acc.table_columns.find(word);
        if (it == acc.table_columns.end())
            acc.table_columns.emplace(word, col);
        else
            it->second += col;
    };
    if (m.encoder) {
        const Matrix<Scalar> dpre = tanh_backward(c.word_vectors, dword.replicate(1, len));
        acc.w_encode.noalias() += dpre * c.inputs.transpose();
        acc.b_encode += dpre.rowwise().sum();
        const Matrix<Scalar> dinputs = m.encoder->weight.transpose() * dpre;
        for (Eigen::Index k = 0; k < len; ++k)
            scatter(c.tokens[static_cast<std::size_t>(k)], Vector<Scalar>(dinputs.col(k)));
    } else {
        for (Eigen::Index k = 0; k < len; ++k)
            scatter(c.tokens[static_cast<std::size_t>(k)], dword);
    }
}

/// Gradient of cross_entropy(softmax_t(logits, T), target).
template <typename Scalar>
Gradients<Scalar> backward(const ClassifierModel<Scalar>& m, const ForwardCache<Scalar>& c,
                           const Vector<Scalar>& target, double temperature) {
    auto g = Gradients<Scalar>::zeros_like(m);
    backward_logits(m, c, softmax_ce_backward(c.logits, target, temperature), g);
    return g;
}

/// param -= step * grad for every block, then bumps the generation.
template <typename Scalar>
void apply_gradients(ClassifierModel<Scalar>& m, Gradients<Scalar>& g, Scalar step) {
    for_each_dense_block(m, g, [step](std::string_view, auto p, auto d) { p -= step * d; });
    for (const auto& [word, col] : g.table_columns)
        m.embedding.matrix.col(static_cast<Eigen::Index>(word)) -= step * col;
    ++m.generation;
}

/// Number of stored values. A folded model counts only its small table and
/// the classifier layers.
template <typename Scalar>
std::size_t count_parameters(const ClassifierModel<Scalar>& m) {
    std::size_t n = static_cast<std::size_t>(m.embedding.matrix.size());
    if (m.encoder)
        n += static_cast<std::size_t>(m.encoder->weight.size() + m.encoder->bias.size());
    n += static_cast<std::size_t>(m.w_hidden.size() + m.b_hidden.size());
    n += static_cast<std::size_t>(m.w_out.size() + m.b_out.size());
    return n;
}

/// Count for a config without materialising the model.
std::size_t count_parameters(const ModelConfig& cfg);

/// Replaces Φ and the encoder by the folded table. Models without an encoder
/// are returned unchanged.
template <typename Scalar>
ClassifierModel<Scalar> fold_model(const ClassifierModel<Scalar>& m) {
    if (!m.encoder)
        return m;
    ClassifierModel<Scalar> f;
    f.config = m.config;
    f.config.n_embed = m.config.n_distill;
    f.config.n_distill = 0;
    f.embedding = fold(*m.encoder, m.embedding).table;
    f.w_hidden = m.w_hidden;
    f.b_hidden = m.b_hidden;
    f.w_out = m.w_out;
    f.b_out = m.b_out;
    f.validate();
    return f;
}

/// Percentage of samples whose argmax prediction equals the label.
template <typename Scalar, typename Samples>
double accuracy(const ClassifierModel<Scalar>& m, const Samples& samples) {
    if (samples.empty())
        return 0.0;
    std::size_t hit = 0;
    for (const auto& s : samples)
        hit += predict(m, std::span<const std::size_t>(s.tokens)) == static_cast<std::size_t>(s.label);
    return 100.0 * static_cast<double>(hit) / static_cast<double>(samples.size());
}

/// Native model file ("MDL1"). The vocabulary is stored between the config
/// block and the parameters.
void save_model(const ClassifierModel<float>& m, const std::filesystem::path& path);
std::string serialize_model(const ClassifierModel<float>& m);

/// Throws FormatError on bad magic/version/length and ConfigError when
/// `expected` is given and differs from the stored config.
ClassifierModel<float> load_model(const std::filesystem::path& path,
                                  const ModelConfig* expected = nullptr);

/// FNV-1a over every stored parameter bit pattern.
std::uint64_t parameter_hash(const ClassifierModel<float>& m);

} // namespace edistill
