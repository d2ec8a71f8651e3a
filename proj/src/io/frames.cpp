#include "affect/io/frames.hpp"

#include <algorithm>
#include <cmath>

#include "affect/error.hpp"
#include "affect/util/bytes.hpp"

namespace affect::io {

void FrameStack::push_real(std::span<const double> hwc) {
    if (hwc.size() != frame_bytes()) {
        throw DimensionError("frame holds " + std::to_string(hwc.size()) + " values, stack expects " +
                             std::to_string(frame_bytes()));
    }
    for (double v : hwc) pixels.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    ++count;
}

std::vector<std::uint8_t> encode_frames(const FrameStack& frames) {
    if (frames.pixels.size() != frames.count * frames.frame_bytes()) {
        throw DimensionError("frame stack pixel buffer does not match its header");
    }
    ByteWriter w;
    w.put_tag("FRMS");
    w.put_u32(kFramesFormatVersion);
    w.put_u32(frames.count);
    w.put_u32(frames.height);
    w.put_u32(frames.width);
    w.put_u32(frames.channels);
    w.put_bytes(frames.pixels);
    return std::move(w.bytes());
}

FrameStack decode_frames(std::span<const std::uint8_t> bytes, const std::string& origin) {
    ByteReader r(bytes, origin);
    r.expect_tag("FRMS");
    const std::uint32_t version = r.u32();
    if (version != kFramesFormatVersion) r.fail("unsupported FRMS version " + std::to_string(version));
    FrameStack f;
    f.count = r.u32();
    f.height = r.u32();
    f.width = r.u32();
    f.channels = r.u32();
    if (f.channels == 0 || f.height == 0 || f.width == 0) r.fail("zero frame dimension");
    const std::uint64_t need = static_cast<std::uint64_t>(f.count) * f.frame_bytes();
    if (need != r.remaining()) {
        r.fail("payload holds " + std::to_string(r.remaining()) + " bytes, header needs " + std::to_string(need));
    }
    auto px = r.take(need);
    f.pixels.assign(px.begin(), px.end());
    return f;
}

void write_frames(const std::filesystem::path& path, const FrameStack& frames) {
    write_file_atomic(path, encode_frames(frames));
}

FrameStack read_frames(const std::filesystem::path& path) { return decode_frames(read_file_bytes(path), path.string()); }

}  // namespace affect::io
