// SPDX-License-Identifier: Apache-2.0
//
// Generated classification tasks for tests and desk-scale experiments.

#pragma once

#include <cstdint>

#include "edistill/data.hpp"

namespace edistill {

struct ProbeTaskSpec {
    std::size_t vocab_size = 2000;
    std::size_t dim = 300;
    std::size_t seq_len = 8;
    std::size_t n_classes = 5; // also the probe width
    double table_scale = 0.5;  // table entries uniform in +-scale
    double noise = 0.1;        // relative to the probe output spread
    std::size_t n_train = 2000;
    std::size_t n_valid = 500;
    std::size_t n_test = 1000;
    std::uint64_t seed = 7;
};

struct SyntheticTask {
    EmbeddingTable<float> table; // the "large pretrained" table
    DatasetSplits splits;
};

/// Random table; each sample is seq_len uniform tokens whose label is the
/// argmax of a fixed hidden linear probe applied to the mean word vector,
/// plus Gaussian noise.
SyntheticTask make_probe_task(const ProbeTaskSpec& spec);

/// Separable task: vocabulary partitioned into n_classes keyword groups; a
/// sample of 1..max_len tokens draws all tokens from its label's group.
SyntheticTask make_keyword_task(std::size_t n_classes, std::size_t words_per_class, std::size_t dim,
                                std::size_t max_len, std::size_t n_train, std::size_t n_valid,
                                std::size_t n_test, std::uint64_t seed);

} // namespace edistill
