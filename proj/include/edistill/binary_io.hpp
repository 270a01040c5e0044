// SPDX-License-Identifier: Apache-2.0
//
// Little-endian byte buffers for the native file formats.

#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "edistill/errors.hpp"

namespace edistill::io {

class ByteWriter {
public:
    void magic(std::string_view m) { buf_.append(m); }
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i)
            buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void str(std::string_view s) {
        u32(checked_u32(s.size()));
        buf_.append(s);
    }
    /// Writes every coefficient of a dense float block in column-major order.
    template <typename Derived>
    void floats(const Eigen::DenseBase<Derived>& m) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                f32(static_cast<float>(m(i, j)));
    }

    const std::string& bytes() const noexcept { return buf_; }

    static std::uint32_t checked_u32(std::size_t n) {
        if (n > 0xffffffffu)
            throw FormatError("value does not fit in u32: " + std::to_string(n));
        return static_cast<std::uint32_t>(n);
    }

private:
    std::string buf_;
};

class ByteReader {
public:
    ByteReader(std::string data, std::string source)
        : data_(std::move(data)), source_(std::move(source)) {}

    void expect_magic(std::string_view m) {
        if (data_.compare(pos_, m.size(), m) != 0 || data_.size() < m.size())
            throw FormatError(source_ + ": bad magic, expected \"" + std::string(m) + "\"");
        pos_ += m.size();
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    template <typename Derived>
    void floats(Eigen::DenseBase<Derived>& m) {
        need(4 * static_cast<std::size_t>(m.size()));
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                m(i, j) = static_cast<typename Derived::Scalar>(f32());
    }
    void expect_end() const {
        if (pos_ != data_.size())
            throw FormatError(source_ + ": " + std::to_string(data_.size() - pos_) +
                              " trailing bytes");
    }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n)
            throw FormatError(source_ + ": truncated at byte " + std::to_string(pos_));
    }

    std::string data_;
    std::string source_;
    std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);

/// Writes through a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

} // namespace edistill::io
