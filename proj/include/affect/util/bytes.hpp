#pragma once

// Little-endian byte packing and whole-file helpers shared by the binary
// container formats (TNSR, FRMS, RIFF/WAVE).

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "affect/error.hpp"

namespace affect {

class ByteWriter {
public:
    void put_tag(std::string_view tag) { bytes_.insert(bytes_.end(), tag.begin(), tag.end()); }
    void put_u16(std::uint16_t v) { put_le(v); }
    void put_u32(std::uint32_t v) { put_le(v); }
    void put_u64(std::uint64_t v) { put_le(v); }
    void put_i16(std::int16_t v) { put_le(static_cast<std::uint16_t>(v)); }
    void put_f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
    void put_bytes(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }
    std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
    template <typename U>
    void put_le(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked reader; every failure names the origin and byte offset.
class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> bytes, std::string origin)
        : bytes_(bytes), origin_(std::move(origin)) {}

    void expect_tag(std::string_view tag) {
        need(tag.size());
        if (std::memcmp(bytes_.data() + pos_, tag.data(), tag.size()) != 0) {
            fail("expected tag '" + std::string(tag) + "'");
        }
        pos_ += tag.size();
    }
    std::string read_tag(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::uint16_t u16() { return get_le<std::uint16_t>(); }
    std::uint32_t u32() { return get_le<std::uint32_t>(); }
    std::uint64_t u64() { return get_le<std::uint64_t>(); }
    std::int16_t i16() { return static_cast<std::int16_t>(get_le<std::uint16_t>()); }
    double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }
    std::span<const std::uint8_t> take(std::size_t n) {
        need(n);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    void skip(std::size_t n) { take(n); }

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(origin_ + ": " + what + " at offset " + std::to_string(pos_));
    }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) {
            fail("truncated data (need " + std::to_string(n) + " bytes, have " + std::to_string(bytes_.size() - pos_) + ")");
        }
    }
    template <typename U>
    U get_le() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
        pos_ += sizeof(U);
        return v;
    }

    std::span<const std::uint8_t> bytes_;
    std::string origin_;
    std::size_t pos_ = 0;
};

/// Throws DataError when the file cannot be opened.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Writes via a temporary sibling file and rename.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

std::string read_file_text(const std::filesystem::path& path);

}  // namespace affect
