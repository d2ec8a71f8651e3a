#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "affect/error.hpp"
#include "affect/metrics/concordance.hpp"
#include "affect/postprocess/chain.hpp"
#include "affect/synth/synth.hpp"
#include "doctest.h"

using namespace affect;
using namespace affect::post;

namespace {

// Sort-based sliding median over the truncated window.
std::vector<double> brute_median(const std::vector<double>& x, std::size_t window) {
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(window / 2), n = static_cast<std::ptrdiff_t>(x.size());
    std::vector<double> out;
    for (std::ptrdiff_t t = 0; t < n; ++t) {
        std::vector<double> w;
        for (std::ptrdiff_t j = t - half; j <= t + half; ++j)
            if (j >= 0 && j < n) w.push_back(x[static_cast<std::size_t>(j)]);
        std::sort(w.begin(), w.end());
        const std::size_t m = w.size();
        out.push_back(m % 2 ? w[m / 2] : (w[m / 2 - 1] + w[m / 2]) / 2.0);
    }
    return out;
}

}  // namespace

TEST_CASE("median filter worked example and edge policy") {
    const std::vector<double> x{1, 5, 2, 8, 3};
    CHECK(median_filter(x, 3) == std::vector<double>{3, 2, 5, 3, 5.5});
    CHECK(median_filter(x, 5) == std::vector<double>{2, 3.5, 3, 4, 3});
    CHECK(median_filter(std::vector<double>(9, 0.4), 5) == std::vector<double>(9, 0.4));
    std::vector<double> impulse(11, 0.0);
    impulse[5] = 1.0;
    CHECK(median_filter(impulse, 3) == std::vector<double>(11, 0.0));
    CHECK_THROWS_AS(median_filter(x, 4), ParameterError);
    CHECK_THROWS_AS(median_filter(x, 1), ParameterError);
    CHECK_THROWS_AS(median_filter(x, 7), ParameterError);
}

TEST_CASE("median filter equals the brute-force oracle") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> len(3, 80);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = len(rng);
        std::vector<double> x(n);
        for (double& v : x) v = trial % 3 == 0 ? std::round(normal(rng) * 2.0) : normal(rng);
        std::uniform_int_distribution<std::size_t> half(1, (n - 1) / 2);
        const std::size_t window = 2 * half(rng) + 1;
        REQUIRE(median_filter(x, window) == brute_median(x, window));
    }
}

TEST_CASE("center, scale and shift") {
    const std::vector<double> x{1, 2, 3, 6};
    CHECK(center(x, 0.0) == x);
    CHECK(center(x, 0.5) == std::vector<double>{1.5, 2.5, 3.5, 6.5});
    CHECK(scale(x, 1.0) == x);
    CHECK(scale(x, 2.0) == std::vector<double>{-1, 1, 3, 9});
    CHECK_THROWS_AS(scale(x, 0.0), ParameterError);
    CHECK(time_shift(x, 0) == x);
    CHECK(time_shift(x, 2) == std::vector<double>{1, 1, 1, 2});
    CHECK(time_shift(std::vector<double>(5, 3.0), 4) == std::vector<double>(5, 3.0));
    CHECK_THROWS_AS(time_shift(x, 4), ParameterError);
}

TEST_CASE("fitting on a perfect prediction keeps nothing") {
    auto t = synth::gen_trajectory(4, 60.0);
    auto fit = fit_chain(t.arousal, t.arousal);
    CHECK(fit.chain.empty());
    CHECK(fit.chain.steps.size() == 4);
    CHECK(fit.rho_trace.size() == 1);
    CHECK(apply_chain(fit.chain, t.valence) == t.valence);
}

TEST_CASE("fitting recovers an injected rating delay") {
    for (std::size_t k0 : {5u, 25u, 100u}) {
        auto t = synth::gen_trajectory(10 + k0, 60.0);
        const auto& pred = t.arousal;
        const auto gold = time_shift(pred, k0);
        auto fit = fit_chain(pred, gold);
        const auto* shift = fit.chain.kept(StepKind::shift);
        REQUIRE(shift != nullptr);
        CHECK(shift->param == static_cast<double>(k0));
        CHECK(fit.chain.kept(StepKind::median) == nullptr);
        CHECK(fit.rho_trace.back() >= 0.999);
        for (std::size_t i = 1; i < fit.rho_trace.size(); ++i) CHECK(fit.rho_trace[i] >= fit.rho_trace[i - 1]);
        const auto replay = apply_chain(fit.chain, pred);
        CHECK(metrics::ccc(replay, gold) == fit.rho_trace.back());
    }
}

TEST_CASE("fitted centring and scaling match validation moments") {
    auto t = synth::gen_trajectory(21, 60.0);
    std::vector<double> pred(t.arousal.size());
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = 0.3 * t.arousal[i] + 0.2;
    FitGrids no_median{{}, 0};
    auto fit = fit_chain(pred, t.arousal, no_median);
    REQUIRE(fit.chain.kept(StepKind::center));
    REQUIRE(fit.chain.kept(StepKind::scale));
    const auto out = apply_chain(fit.chain, pred);
    auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    auto sd = [&](const std::vector<double>& v) {
        const double m = mean(v);
        double s = 0;
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / static_cast<double>(v.size()));
    };
    CHECK(std::abs(mean(out) - mean(t.arousal)) < 1e-12);
    CHECK(std::abs(sd(out) - sd(t.arousal)) < 1e-12);
    CHECK(fit.rho_trace.back() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(fit_chain(std::vector<double>(10, 0.5), t.arousal), DimensionError);
    CHECK_THROWS_AS(fit_chain(std::vector<double>(pred.size(), 0.5), t.arousal, no_median), DegenerateInputError);
}

TEST_CASE("chain text round trip") {
    auto t = synth::gen_trajectory(30, 60.0);
    auto noisy = t.valence;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 0.2);
    for (double& v : noisy) v = 0.5 * v + n(rng);
    auto a = fit_chain(noisy, time_shift(t.valence, 12));
    auto b = fit_chain(t.arousal, t.arousal);
    NamedChains chains{{"arousal", b.chain}, {"valence", a.chain}};
    const auto text = serialize_chains(chains);
    auto back = parse_chains(text, "chain.txt");
    REQUIRE(back.size() == 2);
    CHECK(back[1].first == "valence");
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(back[1].second.steps[i].param == a.chain.steps[i].param);
        CHECK(back[1].second.steps[i].kept == a.chain.steps[i].kept);
        CHECK(back[1].second.steps[i].rho_after == a.chain.steps[i].rho_after);
    }
    CHECK(apply_chain(back[1].second, noisy) == apply_chain(a.chain, noisy));
    CHECK(apply_chain(a.chain, noisy) == apply_chain(a.chain, noisy));
    CHECK_THROWS_AS(parse_chains("step median kept=1 param=3 rho_before=0 rho_after=1\n", "x"), ParseError);
    CHECK_THROWS_AS(parse_chains("chain a\nstep warp kept=1 param=3 rho_before=0 rho_after=1\n", "x"), ParseError);
    CHECK_THROWS_AS(parse_chains("chain a\nstep shift kept=1 param=3\n", "x"), ParseError);
}
