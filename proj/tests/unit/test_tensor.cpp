#include <cmath>
#include <random>
#include <vector>

#include "affect/error.hpp"
#include "affect/tensor/adam.hpp"
#include "affect/tensor/ops.hpp"
#include "affect/tensor/tensor_io.hpp"
#include "doctest.h"
#include "support/gradcheck.hpp"

using namespace affect;
using affect::testing::gradient_error;
using affect::testing::random_tensor;

namespace {

// Direct evaluation of output[c, t] = sum_k sum_m w[c,k,m] * x[k, t*stride + m - pad_left].
std::vector<double> conv1d_oracle(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad_left,
                                  std::size_t t_out) {
    const std::size_t cin = x.dim(0), t = x.dim(1), cout = w.dim(0), taps = w.dim(2);
    std::vector<double> out(cout * t_out, 0.0);
    for (std::size_t c = 0; c < cout; ++c)
        for (std::size_t o = 0; o < t_out; ++o) {
            double s = 0.0;
            for (std::size_t k = 0; k < cin; ++k)
                for (std::size_t m = 0; m < taps; ++m) {
                    const long idx = static_cast<long>(o * stride + m) - static_cast<long>(pad_left);
                    if (idx < 0 || idx >= static_cast<long>(t)) continue;
                    s += w[(c * cin + k) * taps + m] * x[k * t + static_cast<std::size_t>(idx)];
                }
            out[c * t_out + o] = s;
        }
    return out;
}

std::vector<double> conv2d_oracle(const Tensor& x, const Tensor& w, std::size_t stride, Pad2d pad, std::size_t hout,
                                  std::size_t wout) {
    const std::size_t cin = x.dim(0), h = x.dim(1), wd = x.dim(2), cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    std::vector<double> out(cout * hout * wout, 0.0);
    for (std::size_t c = 0; c < cout; ++c)
        for (std::size_t oy = 0; oy < hout; ++oy)
            for (std::size_t ox = 0; ox < wout; ++ox) {
                double s = 0.0;
                for (std::size_t k = 0; k < cin; ++k)
                    for (std::size_t i = 0; i < kh; ++i)
                        for (std::size_t j = 0; j < kw; ++j) {
                            const long iy = static_cast<long>(oy * stride + i) - static_cast<long>(pad.top);
                            const long ix = static_cast<long>(ox * stride + j) - static_cast<long>(pad.left);
                            if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd)) continue;
                            s += w[((c * cin + k) * kh + i) * kw + j] *
                                 x[(k * h + static_cast<std::size_t>(iy)) * wd + static_cast<std::size_t>(ix)];
                        }
                out[(c * hout + oy) * wout + ox] = s;
            }
    return out;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    REQUIRE(a.size() == b.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Weighted sum so gradients are not uniform.
Tensor probe_loss(const Tensor& y, const Tensor& weights) { return sum(mul(y, weights)); }

Tensor fixed_weights(const Shape& shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return random_tensor(shape, rng, false);
}

constexpr int kTrials = 20;
constexpr double kGradTol = 1e-4;

}  // namespace

TEST_CASE("tensor construction enforces shape/data agreement") {
    CHECK_THROWS_AS(Tensor::from({2, 3}, {1, 2, 3}), DimensionError);
    Tensor t = Tensor::zeros({2, 3});
    CHECK(t.numel() == 6);
    CHECK(Tensor::scalar(4.0).item() == 4.0);
    CHECK_THROWS_AS(t.item(), ContractError);
}

TEST_CASE("conv1d worked examples") {
    Tensor x = Tensor::from({1, 5}, {1, 2, 3, 4, 5});
    Tensor id = Tensor::from({1, 1, 1}, {1});
    Tensor y = conv1d(x, id, 1, Padding::valid);
    CHECK(std::vector<double>(y.data().begin(), y.data().end()) == std::vector<double>{1, 2, 3, 4, 5});

    Tensor x2 = Tensor::from({1, 4}, {1, 0, 2, 0});
    Tensor k2 = Tensor::from({1, 1, 2}, {1, 1});
    // Valid windows (1,0) (0,2) (2,0).
    Tensor y2 = conv1d(x2, k2, 1, Padding::valid);
    REQUIRE(y2.dim(1) == 3);
    CHECK(std::vector<double>(y2.data().begin(), y2.data().end()) == std::vector<double>{1, 2, 2});
    // With "same" padding the extra zero goes on the right, giving the fourth window (0, pad).
    Tensor y3 = conv1d(x2, k2, 1, Padding::same);
    CHECK(std::vector<double>(y3.data().begin(), y3.data().end()) == std::vector<double>{1, 2, 2, 0});

    Tensor big = Tensor::zeros({20, 96000});
    Tensor kb = Tensor::zeros({20, 20, 5});
    Tensor yb = conv1d(big, kb, 1, Padding::same);
    CHECK(yb.shape() == Shape{20, 96000});

    CHECK_THROWS_AS(conv1d(Tensor::zeros({3, 10}), Tensor::zeros({2, 2, 3}), 1, Padding::valid), DimensionError);
    CHECK_THROWS_AS(conv1d(Tensor::zeros({1, 3}), Tensor::zeros({1, 1, 5}), 1, Padding::valid), DimensionError);
}

TEST_CASE("conv1d equals nested-loop evaluation") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> ch(1, 8), len(8, 64), taps(1, 7), stride(1, 3);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t cin = ch(rng), cout = ch(rng), t = len(rng), k = taps(rng), s = stride(rng);
        Tensor x = random_tensor({cin, t}, rng, false);
        Tensor w = random_tensor({cout, cin, k}, rng, false);
        for (Padding p : {Padding::valid, Padding::same}) {
            Tensor y = conv1d(x, w, s, p);
            const auto [left, right] = p == Padding::same ? same_padding(t, k, s) : std::pair<std::size_t, std::size_t>{0, 0};
            const std::size_t t_out = (t + left + right - k) / s + 1;
            REQUIRE(y.dim(1) == t_out);
            if (p == Padding::same) CHECK(t_out == (t + s - 1) / s);
            CHECK(max_abs_diff(y.data(), conv1d_oracle(x, w, s, left, t_out)) <= 1e-12);
        }
    }
}

TEST_CASE("conv2d worked examples") {
    std::mt19937_64 rng(3);
    Tensor x = random_tensor({1, 3, 3}, rng, false);
    Tensor unit = Tensor::from({1, 1, 1, 1}, {1});
    Tensor y = conv2d(x, unit, 1, Padding::valid);
    CHECK(max_abs_diff(y.data(), x.data()) == 0.0);

    Tensor ones = Tensor::full({1, 3, 3}, 1.0);
    Tensor k = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor s = conv2d(ones, k, 1, Padding::valid);
    CHECK(s.shape() == Shape{1, 1, 1});
    CHECK(s[0] == 9.0);

    Tensor xr = random_tensor({3, 8, 8}, rng, false);
    Tensor kr = random_tensor({4, 3, 3, 3}, rng, false);
    Tensor yr = conv2d(xr, kr, 1, Padding::valid);
    CHECK(max_abs_diff(yr.data(), conv2d_oracle(xr, kr, 1, Pad2d{}, 6, 6)) <= 1e-12);

    CHECK_THROWS_AS(conv2d(Tensor::zeros({2, 4, 4}), Tensor::zeros({1, 3, 1, 1}), 1, Padding::valid), DimensionError);
}

TEST_CASE("conv2d equals nested-loop evaluation across strides and padding") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> ch(1, 4), side(5, 16), ks(1, 4), st(1, 2), pd(0, 2);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t cin = ch(rng), cout = ch(rng), h = side(rng), w = side(rng), kh = ks(rng), kw = ks(rng);
        const std::size_t s = st(rng);
        const Pad2d pad{pd(rng), pd(rng), pd(rng), pd(rng)};
        Tensor x = random_tensor({cin, h, w}, rng, false);
        Tensor k = random_tensor({cout, cin, kh, kw}, rng, false);
        Tensor y = conv2d(x, k, s, pad);
        const std::size_t hout = (h + pad.top + pad.bottom - kh) / s + 1;
        const std::size_t wout = (w + pad.left + pad.right - kw) / s + 1;
        REQUIRE(y.shape() == Shape{cout, hout, wout});
        CHECK(max_abs_diff(y.data(), conv2d_oracle(x, k, s, pad, hout, wout)) <= 1e-12);
    }
}

TEST_CASE("half-wave rectification") {
    Tensor x = Tensor::from({3}, {-1, 0, 2}, true);
    Tensor y = half_wave_rectify(x);
    CHECK(std::vector<double>(y.data().begin(), y.data().end()) == std::vector<double>{0, 0, 2});
    CHECK(half_wave_rectify(Tensor::from({2}, {-3, -0.5}))[1] == 0.0);

    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = sum(half_wave_rectify(x));
    }
    backward(loss, tape);
    CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{0, 0, 1});
}

TEST_CASE("max pooling over time and channels") {
    Tensor y = max_pool_time(Tensor::from({1, 4}, {1, 3, 2, 5}), 2);
    CHECK(std::vector<double>(y.data().begin(), y.data().end()) == std::vector<double>{3, 5});
    Tensor c = max_pool_time(Tensor::full({2, 7}, 1.5), 3);
    CHECK(c.shape() == Shape{2, 2});
    for (double v : c.data()) CHECK(v == 1.5);
    CHECK(max_pool_time(Tensor::zeros({1, 48000}), 2).shape() == Shape{1, 24000});
    CHECK_THROWS_AS(max_pool_time(Tensor::zeros({1, 4}), 0), ParameterError);

    CHECK(max_pool_channels(Tensor::zeros({40, 9}), 10).shape() == Shape{4, 9});
    Tensor mc = max_pool_channels(Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}), 2);
    CHECK(std::vector<double>(mc.data().begin(), mc.data().end()) == std::vector<double>{4, 5, 6});
    CHECK_THROWS_AS(max_pool_channels(Tensor::zeros({7, 3}), 2), ParameterError);

    std::mt19937_64 rng(9);
    Tensor r = random_tensor({10, 7}, rng, false);
    for (std::size_t pool : {1u, 2u, 5u, 10u}) {
        Tensor p = max_pool_channels(r, pool);
        for (std::size_t g = 0; g < 10 / pool; ++g)
            for (std::size_t t = 0; t < 7; ++t) {
                double best = r[(g * pool) * 7 + t];
                for (std::size_t j = 1; j < pool; ++j) best = std::max(best, r[(g * pool + j) * 7 + t]);
                CHECK(p[g * 7 + t] == best);
            }
    }
}

TEST_CASE("max pooling routes gradient to the first maximum on ties") {
    Tensor x = Tensor::from({1, 4}, {2, 2, 1, 1}, true);
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = sum(max_pool_time(x, 2));
    }
    backward(loss, tape);
    CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{1, 0, 1, 0});
}

TEST_CASE("dropout") {
    Rng rng(42);
    Tensor x = Tensor::full({1000}, 2.0);
    Tensor same = dropout(x, 0.0, true, rng);
    CHECK(max_abs_diff(same.data(), x.data()) == 0.0);
    Tensor eval = dropout(x, 0.7, false, rng);
    CHECK(max_abs_diff(eval.data(), x.data()) == 0.0);
    CHECK_THROWS_AS(dropout(x, 1.0, true, rng), ParameterError);
    CHECK_THROWS_AS(dropout(x, -0.1, true, rng), ParameterError);

    Tensor big = Tensor::full({1000000}, 1.0);
    Tensor d = dropout(big, 0.5, true, rng);
    std::size_t zeros = 0;
    for (double v : d.data()) {
        if (v == 0.0) ++zeros;
        else CHECK(v == 2.0);
    }
    const double frac = static_cast<double>(zeros) / 1e6;
    CHECK(frac == doctest::Approx(0.5).epsilon(0.02));
    CHECK(std::abs(frac - 0.5) <= 0.01);
}

TEST_CASE("backward basics") {
    std::mt19937_64 rng(1);
    Tensor x = random_tensor({3, 4}, rng, true);
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = sum(x);
    }
    backward(loss, tape);
    for (double g : x.grad()) CHECK(g == 1.0);

    Tensor s = Tensor::from({1}, {3.0}, true);
    Tape t2;
    Tensor l2;
    {
        TapeScope scope(t2);
        l2 = sum(mul(s, s));
    }
    backward(l2, t2);
    CHECK(s.grad()[0] == 6.0);

    Tape t3;
    Tensor nonscalar;
    {
        TapeScope scope(t3);
        nonscalar = mul(s, s);
    }
    CHECK_THROWS_AS(backward(Tensor::zeros({2}), t3), ContractError);
}

TEST_CASE("composite conv -> rectify -> pool -> sum matches finite differences") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < kTrials; ++trial) {
        Tensor x = random_tensor({2, 24}, rng, true);
        Tensor w = random_tensor({3, 2, 5}, rng, true);
        auto loss = [&] { return sum(max_pool_time(half_wave_rectify(conv1d(x, w, 1, Padding::same)), 2)); };
        CHECK(gradient_error(w, loss) < 1e-5);
        CHECK(gradient_error(x, loss) < 1e-5);
    }
}

TEST_CASE("backward is bitwise deterministic") {
    std::mt19937_64 rng(8);
    Tensor x = random_tensor({3, 40}, rng, true);
    Tensor w = random_tensor({4, 3, 6}, rng, true);
    Tensor probe = fixed_weights({2, 40}, 2);
    auto run = [&] {
        Tape tape;
        Tensor loss;
        {
            TapeScope scope(tape);
            loss = probe_loss(max_pool_channels(tanh(conv1d(x, w, 1, Padding::same)), 2), probe);
        }
        GradTable g = tape.gradients(loss);
        return std::make_pair(*g.find(x), *g.find(w));
    };
    auto a = run();
    auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}

TEST_CASE("finite-difference checks for every differentiable op") {
    std::mt19937_64 rng(1234);

    SUBCASE("conv1d, both paddings and strides") {
        for (int trial = 0; trial < kTrials; ++trial) {
            const std::size_t stride = 1 + trial % 3;
            const Padding pad = trial % 2 ? Padding::same : Padding::valid;
            Tensor x = random_tensor({3, 17}, rng);
            Tensor w = random_tensor({2, 3, 4}, rng);
            Tensor y0 = conv1d(x, w, stride, pad);
            Tensor probe = fixed_weights(y0.shape(), trial);
            auto loss = [&] { return probe_loss(conv1d(x, w, stride, pad), probe); };
            CHECK(gradient_error(x, loss) < kGradTol);
            CHECK(gradient_error(w, loss) < kGradTol);
        }
    }
    SUBCASE("conv2d") {
        for (int trial = 0; trial < kTrials; ++trial) {
            const std::size_t stride = 1 + trial % 2;
            Tensor x = random_tensor({2, 7, 6}, rng);
            Tensor w = random_tensor({3, 2, 3, 3}, rng);
            const Pad2d pad = Pad2d::uniform(trial % 3);
            Tensor probe = fixed_weights(conv2d(x, w, stride, pad).shape(), trial);
            auto loss = [&] { return probe_loss(conv2d(x, w, stride, pad), probe); };
            CHECK(gradient_error(x, loss) < kGradTol);
            CHECK(gradient_error(w, loss) < kGradTol);
        }
    }
    SUBCASE("pointwise conv2d") {
        for (int trial = 0; trial < kTrials; ++trial) {
            Tensor x = random_tensor({3, 4, 4}, rng);
            Tensor w = random_tensor({2, 3, 1, 1}, rng);
            Tensor probe = fixed_weights({2, 4, 4}, trial);
            auto loss = [&] { return probe_loss(conv2d(x, w, 1, Padding::valid), probe); };
            CHECK(gradient_error(x, loss) < kGradTol);
            CHECK(gradient_error(w, loss) < kGradTol);
        }
    }
    SUBCASE("rectify and pooling") {
        for (int trial = 0; trial < kTrials; ++trial) {
            Tensor x = random_tensor({4, 12}, rng);
            Tensor p1 = fixed_weights({4, 12}, trial);
            Tensor p2 = fixed_weights({4, 4}, trial);
            Tensor p3 = fixed_weights({2, 12}, trial);
            CHECK(gradient_error(x, [&] { return probe_loss(half_wave_rectify(x), p1); }) < kGradTol);
            CHECK(gradient_error(x, [&] { return probe_loss(max_pool_time(x, 3), p2); }) < kGradTol);
            CHECK(gradient_error(x, [&] { return probe_loss(max_pool_channels(x, 2), p3); }) < kGradTol);
            Tensor img = random_tensor({2, 7, 7}, rng);
            Tensor p4 = fixed_weights(max_pool2d(img, 3, 2, 1).shape(), trial);
            CHECK(gradient_error(img, [&] { return probe_loss(max_pool2d(img, 3, 2, 1), p4); }) < kGradTol);
        }
    }
    SUBCASE("smooth elementwise, linear and reshaping ops") {
        for (int trial = 0; trial < kTrials; ++trial) {
            Tensor x = random_tensor({5, 3}, rng);
            Tensor w = random_tensor({4, 3}, rng);
            Tensor b = random_tensor({4}, rng);
            Tensor p = fixed_weights({5, 4}, trial);
            Tensor px = fixed_weights({5, 3}, trial);
            auto lin = [&] { return probe_loss(linear(x, w, b), p); };
            CHECK(gradient_error(x, lin) < kGradTol);
            CHECK(gradient_error(w, lin) < kGradTol);
            CHECK(gradient_error(b, lin) < kGradTol);
            CHECK(gradient_error(x, [&] { return probe_loss(tanh(x), px); }) < kGradTol);
            CHECK(gradient_error(x, [&] { return probe_loss(sigmoid(x), px); }) < kGradTol);

            Tensor y = random_tensor({5, 2}, rng);
            Tensor pc = fixed_weights({5, 5}, trial);
            auto cat = [&] { return probe_loss(concat_cols(x, y), pc); };
            CHECK(gradient_error(x, cat) < kGradTol);
            CHECK(gradient_error(y, cat) < kGradTol);

            Tensor img = random_tensor({3, 4, 5}, rng);
            Tensor pg = fixed_weights({3}, trial);
            CHECK(gradient_error(img, [&] { return probe_loss(global_avg_pool(img), pg); }) < kGradTol);

            std::vector<std::size_t> perm{14, 0, 3, 3, 7, 1};
            Tensor pp = fixed_weights({2, 3}, trial);
            CHECK(gradient_error(x, [&] { return probe_loss(gather(x, perm, {2, 3}), pp); }) < kGradTol);
            Tensor ps = fixed_weights({2, 3}, trial);
            CHECK(gradient_error(x, [&] { return probe_loss(slice_rows(x, 1, 3), ps); }) < kGradTol);
            Tensor pcol = fixed_weights({5}, trial);
            CHECK(gradient_error(x, [&] { return probe_loss(column(x, 2), pcol); }) < kGradTol);
        }
    }
}

TEST_CASE("adam") {
    Tensor p = Tensor::from({3}, {1.0, -2.0, 0.5}, true);
    std::vector<Tensor> params{p};
    AdamState state = AdamState::for_params(params);
    std::vector<std::vector<double>> zero{{0, 0, 0}};
    adam_step(params, zero, state, kDefaultLearningRate);
    CHECK(state.step == 1);
    CHECK(p[0] == 1.0);
    CHECK(p[1] == -2.0);

    Tensor q = Tensor::from({1}, {0.0}, true);
    std::vector<Tensor> qs{q};
    AdamState qstate = AdamState::for_params(qs);
    std::vector<std::vector<double>> g{{0.3}};
    adam_step(qs, g, qstate, 1e-3);
    // m_hat = g, v_hat = g^2, so the first step is lr * g / (|g| + eps).
    CHECK(q[0] == doctest::Approx(-1e-3 * 0.3 / (0.3 + 1e-8)).epsilon(1e-12));
    CHECK(kDefaultLearningRate == 1e-4);
    CHECK(qstate.beta1 == 0.9);
    CHECK(qstate.beta2 == 0.999);
    CHECK(qstate.epsilon == 1e-8);

    std::vector<std::vector<double>> wrong{{0.1, 0.2}};
    CHECK_THROWS_AS(adam_step(qs, wrong, qstate, 1e-3), DimensionError);
}

TEST_CASE("gradient clipping bounds the global norm") {
    std::vector<std::vector<double>> g{{3.0, 0.0}, {4.0}};
    const double before = clip_global_norm(g, 1.0);
    CHECK(before == doctest::Approx(5.0));
    CHECK(g[0][0] == doctest::Approx(0.6));
    CHECK(g[1][0] == doctest::Approx(0.8));
}

TEST_CASE("tensor container round trip and malformed input") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> rank(0, 4), dim(1, 5);
    for (int trial = 0; trial < 25; ++trial) {
        Shape shape(rank(rng));
        for (auto& d : shape) d = dim(rng);
        Tensor t = random_tensor(shape, rng, false);
        Tensor back = decode_tensor(encode_tensor(t));
        CHECK(back.shape() == t.shape());
        CHECK(max_abs_diff(back.data(), t.data()) == 0.0);
    }
    auto bytes = encode_tensor(Tensor::from({2}, {1.0, 2.0}));
    CHECK(bytes.size() == 4 + 4 + 4 + 8 + 16);
    CHECK(bytes[0] == 'T');
    CHECK(bytes[8] == 1);   // rank
    CHECK(bytes[12] == 2);  // dim 0, little-endian
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_WITH_AS(decode_tensor(bad, "w.tnsr"), doctest::Contains("w.tnsr"), ParseError);
    auto truncated = bytes;
    truncated.resize(bytes.size() - 3);
    CHECK_THROWS_AS(decode_tensor(truncated), ParseError);
}
