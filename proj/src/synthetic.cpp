// SPDX-License-Identifier: Apache-2.0

#include "edistill/synthetic.hpp"

#include <cmath>
#include <random>

namespace edistill {

namespace {

Vocabulary numbered_vocab(std::size_t n) {
    std::vector<std::string> words;
    words.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        words.push_back("w" + std::to_string(i));
    return Vocabulary(words);
}

} // namespace

SyntheticTask make_probe_task(const ProbeTaskSpec& spec) {
    Rng rng(spec.seed);
    SyntheticTask task;
    task.table = init_random_table<float>(numbered_vocab(spec.vocab_size), spec.dim, spec.table_scale, rng);
    task.splits.vocab = task.table.vocab;

    std::normal_distribution<double> gauss(0.0, 1.0);
    MatrixD probe(static_cast<Eigen::Index>(spec.n_classes), static_cast<Eigen::Index>(spec.dim));
    for (Eigen::Index j = 0; j < probe.cols(); ++j)
        for (Eigen::Index i = 0; i < probe.rows(); ++i)
            probe(i, j) = gauss(rng);

    // Spread of one probe coordinate of a mean vector: each table entry has
    // variance scale^2 / 3, averaged over seq_len words, summed over dim.
    const double spread = spec.table_scale *
                          std::sqrt(static_cast<double>(spec.dim) / (3.0 * static_cast<double>(spec.seq_len)));
    std::uniform_int_distribution<std::size_t> word(0, spec.vocab_size - 1);
    auto make = [&](std::size_t n) {
        std::vector<Sample> out;
        out.reserve(n);
        for (std::size_t s = 0; s < n; ++s) {
            Sample sample;
            VectorD mean = VectorD::Zero(static_cast<Eigen::Index>(spec.dim));
            for (std::size_t k = 0; k < spec.seq_len; ++k) {
                const std::size_t w = word(rng);
                sample.tokens.push_back(w);
                mean += task.table.matrix.col(static_cast<Eigen::Index>(w)).cast<double>();
            }
            mean /= static_cast<double>(spec.seq_len);
            VectorD score = probe * mean;
            for (Eigen::Index i = 0; i < score.size(); ++i)
                score[i] += spec.noise * spread * gauss(rng);
            sample.label = static_cast<int>(argmax(score));
            out.push_back(std::move(sample));
        }
        return out;
    };
    task.splits.train = make(spec.n_train);
    task.splits.valid = make(spec.n_valid);
    task.splits.test = make(spec.n_test);
    return task;
}

SyntheticTask make_keyword_task(std::size_t n_classes, std::size_t words_per_class, std::size_t dim,
                                std::size_t max_len, std::size_t n_train, std::size_t n_valid,
                                std::size_t n_test, std::uint64_t seed) {
    Rng rng(seed);
    SyntheticTask task;
    task.table = init_random_table<float>(numbered_vocab(n_classes * words_per_class), dim, 0.5, rng);
    task.splits.vocab = task.table.vocab;
    std::uniform_int_distribution<std::size_t> cls(0, n_classes - 1);
    std::uniform_int_distribution<std::size_t> member(0, words_per_class - 1);
    std::uniform_int_distribution<std::size_t> length(1, max_len);
    auto make = [&](std::size_t n) {
        std::vector<Sample> out;
        for (std::size_t s = 0; s < n; ++s) {
            Sample sample;
            const std::size_t c = cls(rng);
            sample.label = static_cast<int>(c);
            const std::size_t len = length(rng);
            for (std::size_t k = 0; k < len; ++k)
                sample.tokens.push_back(c * words_per_class + member(rng));
            out.push_back(std::move(sample));
        }
        return out;
    };
    task.splits.train = make(n_train);
    task.splits.valid = make(n_valid);
    task.splits.test = make(n_test);
    return task;
}

} // namespace edistill
