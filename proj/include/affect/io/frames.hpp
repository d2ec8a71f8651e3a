#pragma once

// FRMS container: "FRMS", u32 version, u32 count, u32 height, u32 width,
// u32 channels, then count frames of 8-bit samples in row-major HWC order.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace affect::io {

inline constexpr std::uint32_t kFramesFormatVersion = 1;

struct FrameStack {
    std::uint32_t count = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint32_t channels = 3;
    std::vector<std::uint8_t> pixels;

    std::size_t frame_bytes() const { return static_cast<std::size_t>(height) * width * channels; }
    std::span<const std::uint8_t> frame(std::size_t i) const { return std::span(pixels).subspan(i * frame_bytes(), frame_bytes()); }
    /// Appends one frame of reals in [0, 1], rounding to the nearest level.
    void push_real(std::span<const double> hwc);
};

std::vector<std::uint8_t> encode_frames(const FrameStack& frames);
FrameStack decode_frames(std::span<const std::uint8_t> bytes, const std::string& origin);

void write_frames(const std::filesystem::path& path, const FrameStack& frames);
FrameStack read_frames(const std::filesystem::path& path);

}  // namespace affect::io
