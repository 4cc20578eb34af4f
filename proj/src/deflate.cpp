#include "supersub/deflate.hpp"

#include <zlib.h>

#include "supersub/error.hpp"

namespace supersub {

Bytes deflate_raw(std::span<const std::uint8_t> input, int level) {
    z_stream zs{};
    if (deflateInit2(&zs, level, Z_DEFLATED, -15, 9, Z_DEFAULT_STRATEGY) != Z_OK) {
        throw ParameterError("deflateInit2 failed");
    }
    Bytes out(deflateBound(&zs, static_cast<uLong>(input.size())));
    zs.next_in = const_cast<Bytef*>(input.data());
    zs.avail_in = static_cast<uInt>(input.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    const auto written = zs.total_out;
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) throw ParameterError("deflate did not finish");
    out.resize(written);
    return out;
}

Bytes inflate_raw(std::span<const std::uint8_t> input, std::size_t max_output) {
    z_stream zs{};
    if (inflateInit2(&zs, -15) != Z_OK) throw ParameterError("inflateInit2 failed");
    Bytes out(std::max<std::size_t>(4 * input.size(), 1024));
    zs.next_in = const_cast<Bytef*>(input.data());
    zs.avail_in = static_cast<uInt>(input.size());
    int rc = Z_OK;
    while (true) {
        zs.next_out = out.data() + zs.total_out;
        zs.avail_out = static_cast<uInt>(out.size() - zs.total_out);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc == Z_STREAM_END) break;
        if (rc == Z_BUF_ERROR && zs.avail_in == 0) break;  // input ended early
        if (rc != Z_OK && rc != Z_BUF_ERROR) break;
        if (zs.avail_out == 0) {
            if (out.size() >= max_output) break;
            out.resize(std::min(out.size() * 2, max_output));
        }
    }
    const std::size_t consumed = zs.total_in;
    const std::size_t produced = zs.total_out;
    inflateEnd(&zs);
    if (rc != Z_STREAM_END) throw FormatError("corrupt or truncated DEFLATE stream", consumed);
    if (consumed != input.size()) throw FormatError("trailing bytes after DEFLATE stream", consumed);
    out.resize(produced);
    return out;
}

}  // namespace supersub
