#include "supersub/byte_io.hpp"

#include <bit>
#include <boost/crc.hpp>
#include <cstring>
#include <fstream>

#include "supersub/error.hpp"

namespace supersub {

std::uint32_t crc32c(std::span<const std::uint8_t> bytes) noexcept {
    boost::crc_optimal<32, 0x1EDC6F41, 0xFFFFFFFF, 0xFFFFFFFF, true, true> crc;
    crc.process_bytes(bytes.data(), bytes.size());
    return crc.checksum();
}

void ByteWriter::u16(std::uint16_t v) {
    buf_.push_back(static_cast<std::uint8_t>(v));
    buf_.push_back(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::string(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
}

void ByteWriter::f32_array(std::span<const float> values) {
    buf_.reserve(buf_.size() + 4 * values.size());
    for (float v : values) f32(v);
}

void ByteReader::need(std::size_t n) const {
    if (remaining() < n) {
        fail("truncated: need " + std::to_string(n) + " bytes, " + std::to_string(remaining()) + " left");
    }
}

void ByteReader::fail(const std::string& what) const { throw FormatError(what, offset()); }

std::uint8_t ByteReader::u8() {
    need(1);
    return bytes_[pos_++];
}

std::uint16_t ByteReader::u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
}

std::uint32_t ByteReader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

std::uint64_t ByteReader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

std::span<const std::uint8_t> ByteReader::raw(std::size_t n) {
    need(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
}

std::string ByteReader::string(std::size_t max_len) {
    const std::uint32_t len = u32();
    if (len > max_len) fail("string length " + std::to_string(len) + " exceeds limit");
    auto body = raw(len);
    return {body.begin(), body.end()};
}

std::vector<float> ByteReader::f32_array(std::size_t count) {
    if (count > remaining() / 4) fail("truncated: float array of " + std::to_string(count) + " elements");
    std::vector<float> out(count);
    for (auto& v : out) v = f32();
    return out;
}

void ByteReader::expect_magic(std::string_view tag) {
    auto got = raw(tag.size());
    if (std::memcmp(got.data(), tag.data(), tag.size()) != 0) {
        pos_ -= tag.size();
        fail("bad magic, expected \"" + std::string(tag) + "\"");
    }
}

void ByteReader::expect_end() const {
    if (remaining() != 0) fail(std::to_string(remaining()) + " unexpected trailing bytes");
}

std::span<const std::uint8_t> verify_trailing_crc(std::span<const std::uint8_t> bytes, std::string_view what) {
    if (bytes.size() < 4) throw FormatError(std::string(what) + ": truncated before checksum", bytes.size());
    const auto body = bytes.first(bytes.size() - 4);
    ByteReader tail(bytes.last(4), body.size());
    const std::uint32_t stored = tail.u32();
    const std::uint32_t actual = crc32c(body);
    if (stored != actual) throw FormatError(std::string(what) + ": checksum mismatch", body.size());
    return body;
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParameterError("cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParameterError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ParameterError("write failed for " + path.string());
}

}  // namespace supersub
