// SPDX-License-Identifier: Apache-2.0
//
// Sentiment-treebank s-expressions: "(3 (2 A) (4 B))". Every node carries a
// label 0-4; leaves carry one token.

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "edistill/embeddings.hpp"

namespace edistill {

inline constexpr int kTreeLabels = 5;

struct LabeledTree {
    int label = 0;
    std::string token; // leaves only
    std::vector<LabeledTree> children;

    bool is_leaf() const noexcept { return children.empty(); }
    std::size_t node_count() const;
    /// Leaf tokens left to right.
    std::vector<std::string> yield() const;

    friend bool operator==(const LabeledTree&, const LabeledTree&) = default;
};

struct Sample {
    std::vector<std::size_t> tokens;
    int label = 0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

enum class PhraseMode { sentence_only, all_phrases };

struct DatasetSplits {
    Vocabulary vocab;
    std::vector<Sample> train;
    std::vector<Sample> valid;
    std::vector<Sample> test;
};

/// Throws ParseError whose location() is the byte offset of the problem.
LabeledTree parse_tree(std::string_view line);

/// Inverse of parse_tree for well-formed trees.
std::string serialize_tree(const LabeledTree& tree);

/// sentence_only yields the root sample; all_phrases yields one sample per
/// node in pre-order, duplicates kept.
std::vector<Sample> extract_samples(const LabeledTree& tree, PhraseMode mode,
                                    const Vocabulary& vocab, bool lowercase = false);

/// Training tokens in first-occurrence order, then the unknown token.
Vocabulary build_vocab(const std::vector<LabeledTree>& train_trees, bool lowercase = false);

/// One tree per line; blank lines skipped, CR before LF ignored. ParseError
/// location() is the 1-based line number.
std::vector<LabeledTree> load_trees(const std::filesystem::path& path);

/// Train uses `mode`; valid and test are always sentence_only.
DatasetSplits load_splits(const std::filesystem::path& train_path,
                          const std::filesystem::path& valid_path,
                          const std::filesystem::path& test_path, PhraseMode mode,
                          bool lowercase = false);

std::string to_lower_ascii(std::string_view s);

/// Native split cache ("SPL1"): u32 count, then per sample u32 label,
/// u32 length, length x u32 token index.
void save_samples(const std::vector<Sample>& samples, const std::filesystem::path& path);
std::vector<Sample> load_samples(const std::filesystem::path& path);

/// Native vocabulary cache ("VOC1"): u32 size, u32 unk index, then
/// length-prefixed tokens.
void save_vocab(const Vocabulary& vocab, const std::filesystem::path& path);
Vocabulary load_vocab(const std::filesystem::path& path);

/// Reads vocab.bin, train.spl, valid.spl and test.spl from a prepared dir.
DatasetSplits load_prepared(const std::filesystem::path& dir);

} // namespace edistill
