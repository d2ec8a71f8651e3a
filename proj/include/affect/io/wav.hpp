#pragma once

// Mono 16-bit PCM RIFF/WAVE files.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace affect::io {

struct PcmAudio {
    std::uint32_t sample_rate = 16000;
    std::vector<std::int16_t> samples;
};

std::vector<std::uint8_t> encode_wav(const PcmAudio& audio);
/// Accepts only PCM format 1, one channel, 16 bits; unknown chunks are skipped.
PcmAudio decode_wav(std::span<const std::uint8_t> bytes, const std::string& origin);

void write_wav(const std::filesystem::path& path, const PcmAudio& audio);
PcmAudio read_wav(const std::filesystem::path& path);

/// Round to nearest with saturation at the 16-bit range; input is in [-1, 1].
std::vector<std::int16_t> quantize_pcm(std::span<const double> samples);
std::vector<double> pcm_to_real(std::span<const std::int16_t> samples);

/// Consecutive windows of `window` samples; the trailing partial window is
/// dropped. Throws DataError when the input is shorter than one window.
std::vector<std::vector<double>> tile_windows(std::span<const double> samples, std::size_t window);

}  // namespace affect::io
