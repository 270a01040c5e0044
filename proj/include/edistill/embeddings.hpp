// SPDX-License-Identifier: Apache-2.0
//
// Vocabulary, look-up tables and the encoding layer that squashes large word
// vectors into small ones.

#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "edistill/core_math.hpp"

namespace edistill {

class Vocabulary {
public:
    static constexpr std::string_view kUnknownToken = "<unk>";

    /// Vocabulary holding only the unknown token.
    Vocabulary();

    /// Builds from distinct tokens and appends the unknown token. Throws
    /// ConfigError on duplicates or when a token equals the reserved one.
    explicit Vocabulary(const std::vector<std::string>& tokens);

    /// Restores a vocabulary that already contains the unknown token at
    /// `unk_index` (used by the binary loaders).
    static Vocabulary from_stored(std::vector<std::string> words, std::size_t unk_index);

    std::size_t size() const noexcept { return words_.size(); }
    std::size_t unk_index() const noexcept { return unk_; }
    const std::string& word(std::size_t i) const;
    const std::vector<std::string>& words() const noexcept { return words_; }

    /// Index of `token`, or unk_index() when absent.
    std::size_t index_of(std::string_view token) const;
    bool contains(std::string_view token) const;

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
        return a.unk_ == b.unk_ && a.words_ == b.words_;
    }

private:
    void rebuild_index();

    std::vector<std::string> words_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t unk_ = 0;
};

/// Look-up table: column i of `matrix` is the vector of vocabulary word i.
template <typename Scalar>
struct EmbeddingTable {
    Vocabulary vocab;
    Matrix<Scalar> matrix; // dim x |V|

    std::size_t dim() const noexcept { return static_cast<std::size_t>(matrix.rows()); }
    std::size_t size() const noexcept { return static_cast<std::size_t>(matrix.cols()); }

    template <typename Other>
    EmbeddingTable<Other> cast() const {
        return {vocab, matrix.template cast<Other>()};
    }
};

/// Small table produced by folding an encoder into a large table.
template <typename Scalar>
struct DistilledTable {
    EmbeddingTable<Scalar> table;

    std::size_t dim() const noexcept { return table.dim(); }
};

/// f(W x + b) with f = tanh, mapping n_embed -> n_distill.
template <typename Scalar>
struct EncoderLayer {
    Matrix<Scalar> weight; // n_distill x n_embed
    Vector<Scalar> bias;   // n_distill

    EncoderLayer() = default;
    EncoderLayer(Matrix<Scalar> w, Vector<Scalar> b) : weight(std::move(w)), bias(std::move(b)) {
        validate();
    }

    /// Uniform +-sqrt(6 / (n_distill + n_embed)) weights, zero bias.
    static EncoderLayer init(std::size_t n_distill, std::size_t n_embed, Rng& rng) {
        check_dims(n_distill, n_embed);
        const double bound = std::sqrt(6.0 / static_cast<double>(n_distill + n_embed));
        std::uniform_real_distribution<double> u(-bound, bound);
        Matrix<Scalar> w(static_cast<Eigen::Index>(n_distill), static_cast<Eigen::Index>(n_embed));
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i)
                w(i, j) = static_cast<Scalar>(u(rng));
        return EncoderLayer(std::move(w), Vector<Scalar>::Zero(static_cast<Eigen::Index>(n_distill)));
    }

    std::size_t n_distill() const noexcept { return static_cast<std::size_t>(weight.rows()); }
    std::size_t n_embed() const noexcept { return static_cast<std::size_t>(weight.cols()); }

    void validate() const {
        check_dims(n_distill(), n_embed());
        if (bias.size() != weight.rows())
            throw DimensionError("EncoderLayer: bias has dim " + std::to_string(bias.size()) +
                                 " but weight has " + std::to_string(weight.rows()) + " rows");
    }

    template <typename Other>
    EncoderLayer<Other> cast() const {
        return {weight.template cast<Other>(), bias.template cast<Other>()};
    }

private:
    static void check_dims(std::size_t n_distill, std::size_t n_embed) {
        if (n_distill == 0 || n_distill >= n_embed)
            throw ConfigError("EncoderLayer: need 0 < n_distill < n_embed, got n_distill=" +
                              std::to_string(n_distill) + " n_embed=" + std::to_string(n_embed));
    }
};

template <typename Scalar>
Vector<Scalar> lookup(const EmbeddingTable<Scalar>& table, std::size_t word_index) {
    if (word_index >= table.size())
        throw IndexError("lookup: word index " + std::to_string(word_index) +
                         " out of range for vocabulary of " + std::to_string(table.size()));
    return table.matrix.col(static_cast<Eigen::Index>(word_index));
}

template <typename Scalar>
Vector<Scalar> encode(const EncoderLayer<Scalar>& enc, const EmbeddingTable<Scalar>& table,
                      std::size_t word_index) {
    if (enc.n_embed() != table.dim())
        throw DimensionError("encode: encoder expects " + std::to_string(enc.n_embed()) +
                             "-dim input, table has dim " + std::to_string(table.dim()));
    return tanh_forward(affine_forward(enc.weight, lookup(table, word_index), enc.bias));
}

/// Precomputes encode() for every word so the large table and the encoder
/// are not needed at inference time.
template <typename Scalar>
DistilledTable<Scalar> fold(const EncoderLayer<Scalar>& enc, const EmbeddingTable<Scalar>& table) {
    if (enc.n_embed() != table.dim())
        throw DimensionError("fold: encoder expects " + std::to_string(enc.n_embed()) +
                             "-dim input, table has dim " + std::to_string(table.dim()));
    Matrix<Scalar> pre = enc.weight * table.matrix;
    pre.colwise() += enc.bias;
    return {{table.vocab, tanh_forward(pre)}};
}

/// Entries i.i.d. uniform in [-scale, scale].
template <typename Scalar>
EmbeddingTable<Scalar> init_random_table(const Vocabulary& vocab, std::size_t dim, double scale,
                                         Rng& rng) {
    if (!(scale > 0.0))
        throw ParameterError("init_random_table: scale must be positive");
    std::uniform_real_distribution<double> u(-scale, scale);
    Matrix<Scalar> m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(vocab.size()));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            m(i, j) = static_cast<Scalar>(u(rng));
    return {vocab, std::move(m)};
}

/// Reads the word2vec text format. The unknown token is appended with the
/// mean of all loaded vectors.
EmbeddingTable<float> load_word2vec_text(const std::filesystem::path& path);
EmbeddingTable<float> parse_word2vec_text(std::string_view text);

/// Writes the word2vec text format (unknown token omitted). Values are
/// printed with enough digits to round-trip through float.
void save_word2vec_text(const EmbeddingTable<float>& table, const std::filesystem::path& path);

/// Native binary table ("EMB1").
void save_table(const EmbeddingTable<float>& table, const std::filesystem::path& path);
EmbeddingTable<float> load_table(const std::filesystem::path& path);

/// Loads either format, sniffing the native magic.
EmbeddingTable<float> load_any_table(const std::filesystem::path& path);

/// Re-indexes a pretrained table onto a task vocabulary. Words missing from
/// `pretrained` get uniform +-`missing_scale` vectors; the unknown token takes
/// the pretrained unknown vector.
EmbeddingTable<float> align_table(const EmbeddingTable<float>& pretrained, const Vocabulary& vocab,
                                  Rng& rng, double missing_scale = 0.1);

} // namespace edistill
