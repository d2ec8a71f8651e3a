#include <cmath>
#include <numbers>
#include <vector>

#include "affect/analysis/descriptors.hpp"
#include "affect/error.hpp"
#include "doctest.h"

using namespace affect;
using namespace affect::analysis;

namespace {

std::vector<double> sine(double freq, double amp, std::size_t n) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / 16000.0);
    return x;
}

}  // namespace

TEST_CASE("sine descriptors match closed form") {
    const auto d = compute_descriptors(sine(200.0, 0.5, 16000));
    CHECK(d.size() == 25);
    for (const auto& f : d) {
        CHECK(f.voiced);
        CHECK(std::abs(f.f0 - 200.0) <= 2.0);
        CHECK(std::abs(f.rms_energy - 0.5 / std::sqrt(2.0)) <= 1e-3);
        CHECK(f.loudness == doctest::Approx(std::log1p(f.rms_energy / 1e-3)));
        CHECK(f.rms_range < 1e-3);
    }
    for (double freq : {85.0, 133.0, 310.0, 390.0}) {
        const auto e = compute_descriptors(sine(freq, 0.3, 6400));
        for (const auto& f : e) CHECK(std::abs(f.f0 - freq) <= 0.01 * freq);
    }
}

TEST_CASE("silence is unvoiced with zero energy") {
    const auto d = compute_descriptors(std::vector<double>(6400, 0.0));
    CHECK(d.size() == 10);
    for (const auto& f : d) {
        CHECK(f.rms_energy == 0.0);
        CHECK_FALSE(f.voiced);
        CHECK(f.f0 == 0.0);
        CHECK(f.loudness == 0.0);
    }
}

TEST_CASE("unvoiced frames carry the last pitch forward") {
    auto x = sine(150.0, 0.4, 640 * 4);
    x.resize(640 * 8, 0.0);
    const auto d = compute_descriptors(x);
    CHECK(d[1].voiced);
    CHECK_FALSE(d[6].voiced);
    CHECK(std::abs(d[6].f0 - 150.0) <= 2.0);
}

TEST_CASE("rms range grows over an amplitude ramp") {
    std::vector<double> x = sine(180.0, 1.0, 32000);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] *= 0.05 + 0.4 * static_cast<double>(i) / 32000.0;
    const auto d = compute_descriptors(x);
    CHECK(d.size() == 50);
    CHECK(d[25].rms_range > 0.05);
    CHECK(d[25].rms_energy > d[5].rms_energy);
    const auto series = descriptor_series(d, 1);
    CHECK(series[25] == d[25].rms_range);
    CHECK_THROWS_AS(descriptor_series(d, 4), ParameterError);
}

TEST_CASE("too little audio is a data error") {
    CHECK_THROWS_AS(compute_descriptors(std::vector<double>(639, 0.1)), DataError);
}
