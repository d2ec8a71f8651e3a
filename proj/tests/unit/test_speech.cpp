#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "affect/error.hpp"
#include "affect/io/wav.hpp"
#include "affect/speech/speech_net.hpp"
#include "doctest.h"
#include "support/gradcheck.hpp"

using namespace affect;
using namespace affect::speech;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = normal(rng);
    return v;
}

std::pair<double, double> moments(std::span<const double> v) {
    double m = 0.0, s = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    for (double x : v) s += (x - m) * (x - m);
    return {m, s / static_cast<double>(v.size())};
}

}  // namespace

TEST_CASE("segment normalization") {
    const auto tiny = SpeechNetConfig::tiny();
    const std::size_t n = tiny.segment_samples();
    CHECK(n == 96000);

    std::vector<double> ramp(n);
    for (std::size_t i = 0; i < n; ++i) ramp[i] = static_cast<double>(i % 7 + 1);
    auto z = normalize_segment(ramp, n);
    auto [m, v] = moments(z);
    CHECK(std::abs(m) < 1e-9);
    CHECK(std::abs(v - 1.0) < 1e-9);

    auto again = normalize_segment(z, n);
    for (std::size_t i = 0; i < n; i += 97) CHECK(std::abs(again[i] - z[i]) <= 1e-12);

    std::vector<double> shifted(ramp);
    for (double& x : shifted) x += 5.0;
    auto zs = normalize_segment(shifted, n);
    for (std::size_t i = 0; i < n; i += 97) CHECK(std::abs(zs[i] - z[i]) <= 1e-12);

    CHECK_THROWS_AS(normalize_segment(std::vector<double>(n, 0.25), n), DegenerateInputError);
    CHECK_THROWS_AS(normalize_segment(std::vector<double>(100, 1.0), n), DimensionError);
}

TEST_CASE("frame arithmetic") {
    auto c = SpeechNetConfig::full();
    CHECK(frame_count(c) == 150);
    c.segment_seconds = 3.0;
    CHECK(frame_count(c) == 75);
    c.segment_seconds = 12.0;
    CHECK(frame_count(c) == 300);
    c.segment_seconds = 6.01;
    CHECK_THROWS_AS(frame_count(c), ConfigurationError);

    const auto p = SpeechNetConfig::full();
    CHECK(p.samples_per_frame() == 640);
    CHECK(p.steps_per_frame() == 320);
    CHECK(p.features_per_frame() == 1280);
    CHECK(SpeechNetConfig::tiny().features_per_frame() == 1280);

    auto bad = SpeechNetConfig::full();
    bad.filters_2 = 45;
    CHECK_THROWS_AS(bad.validate(), ConfigurationError);
    bad = SpeechNetConfig::full();
    bad.frame_ms = 33;
    CHECK_THROWS_AS(bad.validate(), ConfigurationError);
}

TEST_CASE("tiny forward shapes, zero kernels and determinism") {
    Rng rng(1);
    auto cfg = SpeechNetConfig::tiny();
    SpeechNet net = SpeechNet::init(cfg, rng);
    auto seg = normalize_segment(noise(cfg.segment_samples(), 2));
    auto st = net.forward_stages(seg, false, rng);
    CHECK(st.pooled.shape() == Shape{4, 48000});
    CHECK(st.features.shape() == Shape{150, 1280});

    // Features are channel-major within each frame.
    const std::size_t total = 48000;
    for (std::size_t f : {0u, 77u, 149u})
        for (std::size_t c = 0; c < 4; ++c)
            for (std::size_t t : {0u, 5u, 319u})
                CHECK(st.features[f * 1280 + c * 320 + t] == st.channels[c * total + f * 320 + t]);

    auto again = net.forward(seg, false, rng);
    for (std::size_t i = 0; i < again.numel(); ++i) REQUIRE(again[i] == st.features[i]);

    SpeechNet zero(cfg, Tensor::zeros(net.kernels_1().shape()), Tensor::zeros(net.kernels_2().shape()));
    for (double v : zero.forward(seg, false, rng).data()) REQUIRE(v == 0.0);

    CHECK_THROWS_AS(net.forward(std::vector<double>(1000, 0.1), false, rng), DimensionError);
    CHECK_THROWS_AS(SpeechNet(cfg, Tensor::zeros({4, 1, 79}), net.kernels_2()), DimensionError);
}

TEST_CASE("training mode applies dropout to features") {
    Rng rng(3);
    auto cfg = SpeechNetConfig::tiny();
    SpeechNet net = SpeechNet::init(cfg, rng);
    auto seg = normalize_segment(noise(cfg.segment_samples(), 4));
    auto eval = net.forward(seg, false, rng);
    auto train = net.forward(seg, true, rng);
    std::size_t zeros = 0;
    for (std::size_t i = 0; i < train.numel(); ++i) {
        if (train[i] == 0.0) ++zeros;
        else CHECK(std::abs(train[i] - 2.0 * eval[i]) <= 1e-12 * (1 + std::abs(eval[i])));
    }
    const double frac = static_cast<double>(zeros) / static_cast<double>(train.numel());
    CHECK(frac > 0.45);
    CHECK(frac < 0.55);
}

TEST_CASE("shifting the input by two samples shifts the pooled stage by one step") {
    Rng rng(5);
    auto cfg = SpeechNetConfig::tiny();
    SpeechNet net = SpeechNet::init(cfg, rng);
    auto x = noise(cfg.segment_samples(), 6);
    std::vector<double> shifted(x.size(), 0.0);
    for (std::size_t i = 2; i < x.size(); ++i) shifted[i] = x[i - 2];
    auto a = net.forward_stages(x, false, rng);
    auto b = net.forward_stages(shifted, false, rng);
    const std::size_t steps = 48000, margin = cfg.kernel_1 + cfg.kernel_2;
    for (std::size_t c = 0; c < 4; ++c) {
        for (std::size_t t = margin; t + margin < steps; t += 13) {
            CHECK(std::abs(b.pooled[c * steps + t + 1] - a.pooled[c * steps + t]) <= 1e-12);
        }
        for (std::size_t t = margin; t + margin < steps; t += 131) {
            CHECK(std::abs(b.conv2[c * steps + t + 1] - a.conv2[c * steps + t]) <= 1e-10);
        }
    }
}

TEST_CASE("first-layer gradient matches finite differences on a short variant") {
    SpeechNetConfig cfg;
    cfg.segment_seconds = 0.1;
    cfg.frame_ms = 50;
    cfg.filters_1 = 3;
    cfg.kernel_1 = 9;
    cfg.filters_2 = 4;
    cfg.kernel_2 = 7;
    cfg.channel_pool = 2;
    cfg.validate();
    CHECK(cfg.segment_samples() == 1600);
    for (std::uint64_t trial = 0; trial < 3; ++trial) {
        Rng rng(10 + trial);
        SpeechNet net = SpeechNet::init(cfg, rng);
        auto seg = normalize_segment(noise(1600, 20 + trial));
        Tensor k1 = net.kernels_1();
        Tensor k2 = net.kernels_2();
        auto loss = [&] { return sum(net.forward(seg, false, rng)); };
        CHECK(affect::testing::gradient_error(k1, loss) < 1e-4);
        CHECK(affect::testing::gradient_error(k2, loss) < 1e-4);
    }
}

TEST_CASE("wav round trip and validation") {
    std::vector<double> x = noise(5000, 7);
    for (double& v : x) v = std::clamp(0.3 * v, -1.0, 1.0);
    io::PcmAudio audio{16000, io::quantize_pcm(x)};
    auto bytes = io::encode_wav(audio);
    CHECK(bytes.size() == 44 + 10000);
    auto back = io::decode_wav(bytes, "mem.wav");
    CHECK(back.sample_rate == 16000);
    CHECK(back.samples == audio.samples);
    auto real = io::pcm_to_real(back.samples);
    for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(std::abs(real[i] - x[i]) <= 1.0 / 32768.0);

    CHECK(io::quantize_pcm(std::vector<double>{1.0, -1.0, 2.0})[0] == 32767);
    CHECK(io::quantize_pcm(std::vector<double>{-1.0})[0] == -32768);

    auto stereo = bytes;
    stereo[22] = 2;
    CHECK_THROWS_AS(io::decode_wav(stereo, "stereo.wav"), ParseError);
    auto truncated = std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 30);
    try {
        io::decode_wav(truncated, "cut.wav");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("cut.wav") != std::string::npos);
        CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
    auto bad_tag = bytes;
    bad_tag[0] = 'X';
    CHECK_THROWS_AS(io::decode_wav(bad_tag, "tag.wav"), ParseError);
}

TEST_CASE("tiling into fixed windows") {
    std::vector<double> x(96000 * 2 + 500);
    std::iota(x.begin(), x.end(), 0.0);
    auto w = io::tile_windows(x, 96000);
    CHECK(w.size() == 2);
    CHECK(w[1][0] == 96000.0);
    CHECK_THROWS_AS(io::tile_windows(std::vector<double>(95999, 0.0), 96000), DataError);
}
