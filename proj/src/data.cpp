// SPDX-License-Identifier: Apache-2.0

#include "edistill/data.hpp"

#include <charconv>
#include <functional>

#include "edistill/binary_io.hpp"

namespace edistill {

namespace {

constexpr std::string_view kSamplesMagic = "SPL1";
constexpr std::string_view kVocabMagic = "VOC1";

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

class TreeParser {
public:
    explicit TreeParser(std::string_view s) : s_(s) {}

    LabeledTree parse() {
        skip_ws();
        LabeledTree t = node();
        skip_ws();
        if (pos_ != s_.size())
            fail("unexpected text after the root node");
        return t;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError("tree parse error at byte " + std::to_string(pos_) + ": " + what, pos_);
    }

    void skip_ws() {
        while (pos_ < s_.size() && is_ws(s_[pos_]))
            ++pos_;
    }

    std::string_view atom() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && !is_ws(s_[pos_]) && s_[pos_] != '(' && s_[pos_] != ')')
            ++pos_;
        return s_.substr(start, pos_ - start);
    }

    LabeledTree node() {
        if (pos_ >= s_.size() || s_[pos_] != '(')
            fail("expected '('");
        ++pos_;
        skip_ws();
        const std::size_t label_pos = pos_;
        const auto label_text = atom();
        if (label_text.empty()) {
            if (pos_ < s_.size() && s_[pos_] == ')')
                fail("empty node");
            fail("missing label");
        }
        LabeledTree t;
        auto [ptr, ec] = std::from_chars(label_text.data(), label_text.data() + label_text.size(), t.label);
        if (ec != std::errc() || ptr != label_text.data() + label_text.size()) {
            pos_ = label_pos;
            fail("label \"" + std::string(label_text) + "\" is not an integer");
        }
        if (t.label < 0 || t.label >= kTreeLabels) {
            pos_ = label_pos;
            fail("label " + std::to_string(t.label) + " out of range 0-" +
                 std::to_string(kTreeLabels - 1));
        }
        skip_ws();
        if (pos_ >= s_.size())
            fail("unbalanced parentheses");
        if (s_[pos_] == ')')
            fail("empty node");
        if (s_[pos_] == '(') {
            while (pos_ < s_.size() && s_[pos_] == '(') {
                t.children.push_back(node());
                skip_ws();
            }
        } else {
            t.token = std::string(atom());
            skip_ws();
        }
        if (pos_ >= s_.size())
            fail("unbalanced parentheses");
        if (s_[pos_] != ')')
            fail("expected ')'");
        ++pos_;
        return t;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

void collect_yield(const LabeledTree& t, std::vector<std::string>& out) {
    if (t.is_leaf()) {
        out.push_back(t.token);
        return;
    }
    for (const auto& c : t.children)
        collect_yield(c, out);
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    const std::string text = io::read_file(path);
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos)
            nl = text.size();
        std::string line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        lines.push_back(std::move(line));
        pos = nl + 1;
    }
    return lines;
}

} // namespace

std::size_t LabeledTree::node_count() const {
    std::size_t n = 1;
    for (const auto& c : children)
        n += c.node_count();
    return n;
}

std::vector<std::string> LabeledTree::yield() const {
    std::vector<std::string> out;
    collect_yield(*this, out);
    return out;
}

LabeledTree parse_tree(std::string_view line) { return TreeParser(line).parse(); }

std::string serialize_tree(const LabeledTree& tree) {
    std::string out = "(" + std::to_string(tree.label) + " ";
    if (tree.is_leaf()) {
        out += tree.token;
    } else {
        for (std::size_t i = 0; i < tree.children.size(); ++i) {
            if (i)
                out.push_back(' ');
            out += serialize_tree(tree.children[i]);
        }
    }
    out.push_back(')');
    return out;
}

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z')
            c = static_cast<char>(c - 'A' + 'a');
    return out;
}

std::vector<Sample> extract_samples(const LabeledTree& tree, PhraseMode mode,
                                    const Vocabulary& vocab, bool lowercase) {
    std::vector<Sample> out;
    std::vector<std::size_t> leaves;
    // Pre-order: reserve the node's slot, then fill its yield once the
    // children have appended their leaves.
    std::function<void(const LabeledTree&)> walk = [&](const LabeledTree& t) {
        const std::size_t slot = out.size();
        out.push_back(Sample{{}, t.label});
        const std::size_t begin = leaves.size();
        if (t.is_leaf())
            leaves.push_back(vocab.index_of(lowercase ? to_lower_ascii(t.token) : t.token));
        for (const auto& c : t.children)
            walk(c);
        out[slot].tokens.assign(leaves.begin() + static_cast<std::ptrdiff_t>(begin), leaves.end());
    };
    walk(tree);
    if (mode == PhraseMode::sentence_only)
        out.resize(1);
    return out;
}

Vocabulary build_vocab(const std::vector<LabeledTree>& train_trees, bool lowercase) {
    std::vector<std::string> tokens;
    std::unordered_map<std::string, bool> seen;
    for (const auto& t : train_trees) {
        for (auto& tok : t.yield()) {
            std::string key = lowercase ? to_lower_ascii(tok) : std::move(tok);
            if (seen.emplace(key, true).second)
                tokens.push_back(std::move(key));
        }
    }
    return Vocabulary(tokens);
}

std::vector<LabeledTree> load_trees(const std::filesystem::path& path) {
    std::vector<LabeledTree> trees;
    const auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].find_first_not_of(" \t") == std::string::npos)
            continue;
        try {
            trees.push_back(parse_tree(lines[i]));
        } catch (const ParseError& e) {
            throw ParseError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what(), i + 1);
        }
    }
    return trees;
}

DatasetSplits load_splits(const std::filesystem::path& train_path,
                          const std::filesystem::path& valid_path,
                          const std::filesystem::path& test_path, PhraseMode mode, bool lowercase) {
    const auto train = load_trees(train_path);
    const auto valid = load_trees(valid_path);
    const auto test = load_trees(test_path);
    DatasetSplits s{build_vocab(train, lowercase), {}, {}, {}};
    auto append = [&](const std::vector<LabeledTree>& trees, PhraseMode m, std::vector<Sample>& out) {
        for (const auto& t : trees) {
            auto samples = extract_samples(t, m, s.vocab, lowercase);
            out.insert(out.end(), std::make_move_iterator(samples.begin()),
                       std::make_move_iterator(samples.end()));
        }
    };
    append(train, mode, s.train);
    append(valid, PhraseMode::sentence_only, s.valid);
    append(test, PhraseMode::sentence_only, s.test);
    return s;
}

void save_samples(const std::vector<Sample>& samples, const std::filesystem::path& path) {
    io::ByteWriter w;
    w.magic(kSamplesMagic);
    w.u32(io::ByteWriter::checked_u32(samples.size()));
    for (const auto& s : samples) {
        w.u32(static_cast<std::uint32_t>(s.label));
        w.u32(io::ByteWriter::checked_u32(s.tokens.size()));
        for (auto t : s.tokens)
            w.u32(io::ByteWriter::checked_u32(t));
    }
    io::write_file_atomic(path, w.bytes());
}

std::vector<Sample> load_samples(const std::filesystem::path& path) {
    io::ByteReader r(io::read_file(path), path.string());
    r.expect_magic(kSamplesMagic);
    const std::uint32_t n = r.u32();
    std::vector<Sample> out;
    out.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        Sample s;
        s.label = static_cast<int>(r.u32());
        const std::uint32_t len = r.u32();
        if (len == 0)
            throw FormatError(path.string() + ": empty sample " + std::to_string(i));
        s.tokens.resize(len);
        for (auto& t : s.tokens)
            t = r.u32();
        out.push_back(std::move(s));
    }
    r.expect_end();
    return out;
}

void save_vocab(const Vocabulary& vocab, const std::filesystem::path& path) {
    io::ByteWriter w;
    w.magic(kVocabMagic);
    w.u32(io::ByteWriter::checked_u32(vocab.size()));
    w.u32(io::ByteWriter::checked_u32(vocab.unk_index()));
    for (const auto& word : vocab.words())
        w.str(word);
    io::write_file_atomic(path, w.bytes());
}

Vocabulary load_vocab(const std::filesystem::path& path) {
    io::ByteReader r(io::read_file(path), path.string());
    r.expect_magic(kVocabMagic);
    const std::uint32_t n = r.u32();
    const std::uint32_t unk = r.u32();
    std::vector<std::string> words;
    words.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i)
        words.push_back(r.str());
    r.expect_end();
    return Vocabulary::from_stored(std::move(words), unk);
}

DatasetSplits load_prepared(const std::filesystem::path& dir) {
    DatasetSplits s{load_vocab(dir / "vocab.bin"), load_samples(dir / "train.spl"),
                    load_samples(dir / "valid.spl"), load_samples(dir / "test.spl")};
    for (const auto* split : {&s.train, &s.valid, &s.test})
        for (const auto& sample : *split)
            for (auto t : sample.tokens)
                if (t >= s.vocab.size())
                    throw FormatError(dir.string() + ": token index " + std::to_string(t) +
                                      " outside the vocabulary");
    return s;
}

} // namespace edistill
