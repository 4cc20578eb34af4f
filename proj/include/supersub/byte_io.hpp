#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace supersub {

using Bytes = std::vector<std::uint8_t>;

// CRC-32C (Castagnoli), as used by the trailing checksum of every container.
std::uint32_t crc32c(std::span<const std::uint8_t> bytes) noexcept;

// Little-endian appender.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i16(std::int16_t v) { u16(static_cast<std::uint16_t>(v)); }
    void f32(float v);
    void raw(std::span<const std::uint8_t> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }
    void magic(std::string_view tag) { buf_.insert(buf_.end(), tag.begin(), tag.end()); }
    // u32 length prefix followed by the bytes.
    void string(std::string_view s);
    void f32_array(std::span<const float> values);

    // Appends CRC-32C of everything written so far.
    void seal_crc() { u32(crc32c(buf_)); }

    std::size_t size() const noexcept { return buf_.size(); }
    const Bytes& bytes() const noexcept { return buf_; }
    Bytes take() noexcept { return std::move(buf_); }

private:
    Bytes buf_;
};

// Little-endian cursor. Every failure throws FormatError carrying the byte offset.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes, std::uint64_t base_offset = 0)
        : bytes_(bytes), base_(base_offset) {}

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    std::int16_t i16() { return static_cast<std::int16_t>(u16()); }
    float f32();
    std::span<const std::uint8_t> raw(std::size_t n);
    std::string string(std::size_t max_len = 1u << 26);
    std::vector<float> f32_array(std::size_t count);
    void expect_magic(std::string_view tag);

    std::size_t position() const noexcept { return pos_; }
    std::uint64_t offset() const noexcept { return base_ + pos_; }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
    void expect_end() const;

    [[noreturn]] void fail(const std::string& what) const;

private:
    void need(std::size_t n) const;

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
    std::uint64_t base_;
};

// Splits off and verifies the trailing CRC-32C; returns the covered prefix.
std::span<const std::uint8_t> verify_trailing_crc(std::span<const std::uint8_t> bytes, std::string_view what);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace supersub
