#pragma once

#include <span>

#include "supersub/byte_io.hpp"

namespace supersub {

// Raw DEFLATE (RFC 1951, no zlib/gzip wrapper).
Bytes deflate_raw(std::span<const std::uint8_t> input, int level = 9);

// Throws FormatError (offset relative to `input`) on corrupt or truncated streams.
Bytes inflate_raw(std::span<const std::uint8_t> input, std::size_t max_output = std::size_t{1} << 30);

}  // namespace supersub
