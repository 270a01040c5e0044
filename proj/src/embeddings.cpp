// SPDX-License-Identifier: Apache-2.0

#include "edistill/embeddings.hpp"

#include <charconv>
#include <fstream>
#include <string>

#include "edistill/binary_io.hpp"

namespace edistill {

namespace {

constexpr std::string_view kTableMagic = "EMB1";

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && is_space(line[i]))
            ++i;
        const std::size_t start = i;
        while (i < line.size() && !is_space(line[i]))
            ++i;
        if (i > start)
            out.push_back(line.substr(start, i - start));
    }
    return out;
}

template <typename T>
bool parse_number(std::string_view field, T& value) {
    const char* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, value);
    return ec == std::errc() && ptr == end;
}

ParseError w2v_error(std::size_t line, const std::string& what) {
    return ParseError("word2vec line " + std::to_string(line) + ": " + what, line);
}

} // namespace

Vocabulary::Vocabulary() : words_{std::string(kUnknownToken)} { rebuild_index(); }

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
    words_.reserve(tokens.size() + 1);
    for (const auto& t : tokens) {
        if (t == kUnknownToken)
            throw ConfigError("Vocabulary: token \"" + t + "\" is reserved");
        words_.push_back(t);
    }
    unk_ = words_.size();
    words_.emplace_back(kUnknownToken);
    rebuild_index();
    if (index_.size() != words_.size())
        throw ConfigError("Vocabulary: duplicate tokens");
}

Vocabulary Vocabulary::from_stored(std::vector<std::string> words, std::size_t unk_index) {
    if (unk_index >= words.size() || words[unk_index] != kUnknownToken)
        throw FormatError("stored vocabulary has no unknown token at index " +
                          std::to_string(unk_index));
    Vocabulary v;
    v.words_ = std::move(words);
    v.unk_ = unk_index;
    v.rebuild_index();
    if (v.index_.size() != v.words_.size())
        throw FormatError("stored vocabulary has duplicate tokens");
    return v;
}

void Vocabulary::rebuild_index() {
    index_.clear();
    index_.reserve(words_.size());
    for (std::size_t i = 0; i < words_.size(); ++i)
        index_.emplace(words_[i], i);
}

const std::string& Vocabulary::word(std::size_t i) const {
    if (i >= words_.size())
        throw IndexError("Vocabulary: index " + std::to_string(i) + " out of range");
    return words_[i];
}

std::size_t Vocabulary::index_of(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? unk_ : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
    return index_.find(std::string(token)) != index_.end();
}

EmbeddingTable<float> parse_word2vec_text(std::string_view text) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    auto next_line = [&](std::string_view& line) {
        if (pos >= text.size())
            return false;
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos)
            nl = text.size();
        line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        return true;
    };

    std::string_view line;
    if (!next_line(line))
        throw w2v_error(1, "missing header");
    const auto header = split_fields(line);
    std::size_t count = 0;
    std::size_t dim = 0;
    if (header.size() != 2 || !parse_number(header[0], count) || !parse_number(header[1], dim) ||
        dim == 0)
        throw w2v_error(line_no, "header must be \"<count> <dim>\"");

    std::vector<std::string> words;
    words.reserve(count);
    std::vector<float> values;
    values.reserve(count * dim);
    std::unordered_map<std::string, std::size_t> seen;
    while (next_line(line)) {
        const auto fields = split_fields(line);
        if (fields.empty())
            continue;
        if (words.size() == count)
            throw w2v_error(line_no, "more vectors than the header count " + std::to_string(count));
        if (fields.size() != dim + 1)
            throw w2v_error(line_no, "expected " + std::to_string(dim) + " values, got " +
                                         std::to_string(fields.size() - 1));
        std::string word(fields[0]);
        if (word == Vocabulary::kUnknownToken)
            throw w2v_error(line_no, "token \"" + word + "\" is reserved");
        if (!seen.emplace(word, line_no).second)
            throw w2v_error(line_no, "duplicate word \"" + word + "\"");
        for (std::size_t k = 1; k <= dim; ++k) {
            float v = 0.0f;
            if (!parse_number(fields[k], v))
                throw w2v_error(line_no, "malformed value \"" + std::string(fields[k]) + "\"");
            values.push_back(v);
        }
        words.push_back(std::move(word));
    }
    if (words.size() != count)
        throw w2v_error(line_no, "header declares " + std::to_string(count) + " vectors, found " +
                                     std::to_string(words.size()));

    EmbeddingTable<float> table{Vocabulary(words),
                                MatrixF(static_cast<Eigen::Index>(dim),
                                        static_cast<Eigen::Index>(count + 1))};
    table.matrix.leftCols(static_cast<Eigen::Index>(count)) =
        Eigen::Map<const MatrixF>(values.data(), static_cast<Eigen::Index>(dim),
                                  static_cast<Eigen::Index>(count));
    VectorD mean = VectorD::Zero(static_cast<Eigen::Index>(dim));
    if (count > 0)
        mean = table.matrix.leftCols(static_cast<Eigen::Index>(count)).cast<double>().rowwise().mean();
    table.matrix.col(static_cast<Eigen::Index>(table.vocab.unk_index())) = mean.cast<float>();
    return table;
}

EmbeddingTable<float> load_word2vec_text(const std::filesystem::path& path) {
    const std::string text = io::read_file(path);
    try {
        return parse_word2vec_text(text);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.location());
    }
}

void save_word2vec_text(const EmbeddingTable<float>& table, const std::filesystem::path& path) {
    std::string out = std::to_string(table.size() - 1) + " " + std::to_string(table.dim()) + "\n";
    char buf[64];
    for (std::size_t w = 0; w < table.size(); ++w) {
        if (w == table.vocab.unk_index())
            continue;
        out += table.vocab.word(w);
        for (std::size_t i = 0; i < table.dim(); ++i) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf,
                                           table.matrix(static_cast<Eigen::Index>(i),
                                                        static_cast<Eigen::Index>(w)));
            out.push_back(' ');
            out.append(buf, ptr);
        }
        out.push_back('\n');
    }
    io::write_file_atomic(path, out);
}

void save_table(const EmbeddingTable<float>& table, const std::filesystem::path& path) {
    io::ByteWriter w;
    w.magic(kTableMagic);
    w.u32(io::ByteWriter::checked_u32(table.size()));
    w.u32(io::ByteWriter::checked_u32(table.dim()));
    for (const auto& word : table.vocab.words())
        w.str(word);
    w.floats(table.matrix);
    io::write_file_atomic(path, w.bytes());
}

EmbeddingTable<float> load_table(const std::filesystem::path& path) {
    io::ByteReader r(io::read_file(path), path.string());
    r.expect_magic(kTableMagic);
    const std::uint32_t n = r.u32();
    const std::uint32_t dim = r.u32();
    std::vector<std::string> words;
    words.reserve(n);
    std::size_t unk = n;
    for (std::uint32_t i = 0; i < n; ++i) {
        words.push_back(r.str());
        if (words.back() == Vocabulary::kUnknownToken)
            unk = i;
    }
    auto vocab = Vocabulary::from_stored(std::move(words), unk);
    MatrixF m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n));
    r.floats(m);
    r.expect_end();
    return {std::move(vocab), std::move(m)};
}

EmbeddingTable<float> load_any_table(const std::filesystem::path& path) {
    std::ifstream probe(path, std::ios::binary);
    char magic[4] = {};
    if (probe.read(magic, 4) && std::string_view(magic, 4) == kTableMagic)
        return load_table(path);
    return load_word2vec_text(path);
}

EmbeddingTable<float> align_table(const EmbeddingTable<float>& pretrained, const Vocabulary& vocab,
                                  Rng& rng, double missing_scale) {
    std::uniform_real_distribution<double> u(-missing_scale, missing_scale);
    MatrixF m(static_cast<Eigen::Index>(pretrained.dim()), static_cast<Eigen::Index>(vocab.size()));
    for (std::size_t w = 0; w < vocab.size(); ++w) {
        const auto col = static_cast<Eigen::Index>(w);
        if (w == vocab.unk_index()) {
            m.col(col) = pretrained.matrix.col(static_cast<Eigen::Index>(pretrained.vocab.unk_index()));
        } else if (pretrained.vocab.contains(vocab.word(w))) {
            m.col(col) = pretrained.matrix.col(
                static_cast<Eigen::Index>(pretrained.vocab.index_of(vocab.word(w))));
        } else {
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                m(i, col) = static_cast<float>(u(rng));
        }
    }
    return {vocab, std::move(m)};
}

} // namespace edistill
