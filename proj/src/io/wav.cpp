#include "affect/io/wav.hpp"

#include <algorithm>
#include <cmath>

#include "affect/error.hpp"
#include "affect/util/bytes.hpp"

namespace affect::io {

std::vector<std::uint8_t> encode_wav(const PcmAudio& audio) {
    const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
    ByteWriter w;
    w.put_tag("RIFF");
    w.put_u32(36 + data_bytes);
    w.put_tag("WAVE");
    w.put_tag("fmt ");
    w.put_u32(16);
    w.put_u16(1);
    w.put_u16(1);
    w.put_u32(audio.sample_rate);
    w.put_u32(audio.sample_rate * 2);
    w.put_u16(2);
    w.put_u16(16);
    w.put_tag("data");
    w.put_u32(data_bytes);
    for (std::int16_t s : audio.samples) w.put_i16(s);
    return std::move(w.bytes());
}

PcmAudio decode_wav(std::span<const std::uint8_t> bytes, const std::string& origin) {
    ByteReader r(bytes, origin);
    r.expect_tag("RIFF");
    r.u32();
    r.expect_tag("WAVE");
    PcmAudio audio;
    bool have_fmt = false;
    while (r.remaining() > 0) {
        const std::string id = r.read_tag(4);
        const std::uint32_t size = r.u32();
        if (id == "fmt ") {
            if (size < 16) r.fail("fmt chunk too small");
            const std::uint16_t format = r.u16();
            const std::uint16_t channels = r.u16();
            audio.sample_rate = r.u32();
            r.u32();
            r.u16();
            const std::uint16_t bits = r.u16();
            if (format != 1) r.fail("unsupported wave format " + std::to_string(format));
            if (channels != 1) r.fail("expected mono audio, found " + std::to_string(channels) + " channels");
            if (bits != 16) r.fail("expected 16-bit samples, found " + std::to_string(bits));
            r.skip(size - 16 + (size & 1));
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) r.fail("data chunk before fmt chunk");
            if (size % 2 != 0) r.fail("odd data chunk size");
            audio.samples.resize(size / 2);
            for (auto& s : audio.samples) s = r.i16();
            return audio;
        } else {
            r.skip(size + (size & 1));
        }
    }
    r.fail("missing data chunk");
}

void write_wav(const std::filesystem::path& path, const PcmAudio& audio) { write_file_atomic(path, encode_wav(audio)); }

PcmAudio read_wav(const std::filesystem::path& path) { return decode_wav(read_file_bytes(path), path.string()); }

std::vector<std::int16_t> quantize_pcm(std::span<const double> samples) {
    std::vector<std::int16_t> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double v = std::clamp(std::nearbyint(samples[i] * 32768.0), -32768.0, 32767.0);
        out[i] = static_cast<std::int16_t>(v);
    }
    return out;
}

std::vector<double> pcm_to_real(std::span<const std::int16_t> samples) {
    std::vector<double> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) out[i] = samples[i] / 32768.0;
    return out;
}

std::vector<std::vector<double>> tile_windows(std::span<const double> samples, std::size_t window) {
    if (window == 0) throw ParameterError("window length must be positive");
    if (samples.size() < window) {
        throw DataError("audio holds " + std::to_string(samples.size()) + " samples, shorter than one " +
                        std::to_string(window) + "-sample segment");
    }
    std::vector<std::vector<double>> out;
    for (std::size_t start = 0; start + window <= samples.size(); start += window) {
        out.emplace_back(samples.begin() + static_cast<std::ptrdiff_t>(start),
                         samples.begin() + static_cast<std::ptrdiff_t>(start + window));
    }
    return out;
}

}  // namespace affect::io
