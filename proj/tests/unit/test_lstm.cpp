#include <cmath>
#include <random>
#include <vector>

#include "affect/error.hpp"
#include "affect/recurrent/lstm.hpp"
#include "affect/tensor/ops.hpp"
#include "doctest.h"
#include "support/gradcheck.hpp"

using namespace affect;
using namespace affect::recurrent;
using affect::testing::gradient_error;
using affect::testing::random_tensor;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

LstmLayer random_layer(std::size_t d, std::size_t h, std::mt19937_64& rng, double scale = 0.5) {
    LstmLayer layer;
    layer.input_size = d;
    layer.hidden_size = h;
    layer.w_ih = random_tensor({4 * h, d}, rng, true, scale);
    layer.w_hh = random_tensor({4 * h, h}, rng, true, scale);
    layer.bias = random_tensor({4 * h}, rng, true, scale);
    return layer;
}

// Weighted sum keeps every output element distinguishable in the loss.
Tensor probe_loss(const Tensor& out, const Tensor& weights) { return sum(mul(out, weights)); }

}  // namespace

TEST_CASE("zero weights give zero output") {
    LstmLayer layer = LstmLayer::zeros(3, 5);
    std::mt19937_64 rng(1);
    auto out = lstm_forward(random_tensor({7, 3}, rng, false), layer);
    CHECK(out.outputs.shape() == Shape{7, 5});
    for (double v : out.outputs.data()) CHECK(v == 0.0);
    for (double v : out.final_state.c) CHECK(v == 0.0);
}

TEST_CASE("single step matches a hand computation") {
    LstmLayer layer = LstmLayer::zeros(2, 1);
    const std::vector<double> wi{0.3, -0.2, 0.5, 0.1, -0.4, 0.7, 0.2, 0.6};
    std::copy(wi.begin(), wi.end(), layer.w_ih.mutable_data().begin());
    const std::vector<double> b{0.1, 1.0, -0.3, 0.05};
    std::copy(b.begin(), b.end(), layer.bias.mutable_data().begin());
    const std::vector<double> x{0.8, -1.5};

    const double zi = 0.3 * 0.8 - 0.2 * -1.5 + 0.1;
    const double zf = 0.5 * 0.8 + 0.1 * -1.5 + 1.0;
    const double zg = -0.4 * 0.8 + 0.7 * -1.5 - 0.3;
    const double zo = 0.2 * 0.8 + 0.6 * -1.5 + 0.05;
    const double c = sig(zi) * std::tanh(zg);
    const double h = sig(zo) * std::tanh(c);

    auto out = lstm_forward(Tensor::from({1, 2}, x), layer);
    CHECK(std::abs(out.outputs[0] - h) <= 1e-12);
    CHECK(std::abs(out.final_state.c[0] - c) <= 1e-12);
    CHECK(std::abs(out.trace.gates[1] - sig(zf)) <= 1e-12);

    // Non-zero initial state feeds the forget path and recurrent weights.
    layer.w_hh.mutable_data()[0] = 0.9;
    LstmState init{{0.4}, {-0.6}};
    auto out2 = lstm_forward(Tensor::from({1, 2}, x), layer, &init);
    const double c2 = sig(zf) * -0.6 + sig(zi + 0.9 * 0.4) * std::tanh(zg);
    CHECK(std::abs(out2.final_state.c[0] - c2) <= 1e-12);
    CHECK(std::abs(out2.outputs[0] - sig(zo) * std::tanh(c2)) <= 1e-12);
}

TEST_CASE("outputs are bounded and the trace matches the tensor") {
    std::mt19937_64 rng(2);
    LstmLayer layer = random_layer(4, 6, rng, 3.0);
    auto out = lstm_forward(random_tensor({50, 4}, rng, false, 5.0), layer);
    for (double v : out.outputs.data()) CHECK(std::abs(v) < 1.0);
    for (std::size_t t = 0; t < 50; ++t)
        for (std::size_t j = 0; j < 6; ++j) CHECK(out.trace.h(t, j) == out.outputs[t * 6 + j]);
    CHECK(out.trace.cell_series(2).size() == 50);
    CHECK(out.trace.gates.size() == 50 * 24);
}

TEST_CASE("split sequences continue exactly from the carried state") {
    std::mt19937_64 rng(3);
    LstmLayer layer = random_layer(3, 4, rng);
    Tensor seq = random_tensor({12, 3}, rng, false);
    auto full = lstm_forward(seq, layer);
    auto first = lstm_forward(slice_rows(seq, 0, 5), layer);
    auto second = lstm_forward(slice_rows(seq, 5, 12), layer, &first.final_state);
    for (std::size_t i = 0; i < 5 * 4; ++i) CHECK(std::abs(first.outputs[i] - full.outputs[i]) <= 1e-12);
    for (std::size_t i = 0; i < 7 * 4; ++i) CHECK(std::abs(second.outputs[i] - full.outputs[20 + i]) <= 1e-12);
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(second.final_state.c[j] - full.final_state.c[j]) <= 1e-12);
}

TEST_CASE("lstm gradients match finite differences") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 5; ++trial) {
        LstmLayer layer = random_layer(3, 4, rng);
        Tensor seq = random_tensor({5, 3}, rng);
        Tensor w = random_tensor({5, 4}, rng, false);
        auto loss = [&] { return probe_loss(lstm_forward(seq, layer).outputs, w); };
        CHECK(gradient_error(seq, loss) < 1e-4);
        CHECK(gradient_error(layer.w_ih, loss) < 1e-4);
        CHECK(gradient_error(layer.w_hh, loss) < 1e-4);
        CHECK(gradient_error(layer.bias, loss) < 1e-4);
    }
}

TEST_CASE("frozen inputs still propagate to the weights") {
    std::mt19937_64 rng(5);
    LstmLayer layer = random_layer(2, 3, rng);
    layer.w_hh.set_requires_grad(false);
    Tensor seq = random_tensor({4, 2}, rng, false);
    Tensor w = random_tensor({4, 3}, rng, false);
    auto loss = [&] { return probe_loss(lstm_forward(seq, layer).outputs, w); };
    CHECK(gradient_error(layer.w_ih, loss) < 1e-4);
    CHECK(gradient_error(layer.bias, loss) < 1e-4);
}

TEST_CASE("stack equals manual composition") {
    std::mt19937_64 rng(6);
    LstmStack stack = LstmStack::init(5, 4, 2, rng);
    CHECK(stack.layers.size() == 2);
    CHECK(stack.layers[1].input_size == 4);
    CHECK(stack.parameters().size() == 6);
    Tensor seq = random_tensor({9, 5}, rng, false);
    auto composed = lstm_forward(lstm_forward(seq, stack.layers[0]).outputs, stack.layers[1]);
    auto out = stack_forward(seq, stack);
    CHECK(out.traces.size() == 2);
    for (std::size_t i = 0; i < out.outputs.numel(); ++i) CHECK(out.outputs[i] == composed.outputs[i]);

    Tensor w = random_tensor({9, 4}, rng, false);
    auto loss = [&] { return probe_loss(stack_forward(seq, stack).outputs, w); };
    CHECK(gradient_error(stack.layers[0].w_ih, loss) < 1e-4);
    CHECK(gradient_error(stack.layers[1].w_hh, loss) < 1e-4);
}

TEST_CASE("init layout") {
    std::mt19937_64 rng(7);
    auto layer = LstmLayer::init(6, 3, rng);
    auto b = layer.bias.data();
    for (std::size_t r = 0; r < 12; ++r) CHECK(b[r] == (r >= 3 && r < 6 ? 1.0 : 0.0));
    CHECK(layer.w_ih.shape() == Shape{12, 6});
    CHECK(layer.w_hh.shape() == Shape{12, 3});
    CHECK(layer.w_ih.requires_grad());
}

TEST_CASE("output head") {
    std::mt19937_64 rng(8);
    OutputHead head = OutputHead::init(4, rng);
    Tensor hidden = random_tensor({4, 4}, rng);
    Tensor out = output_head(hidden, head);
    CHECK(out.shape() == Shape{4, 2});
    for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t k = 0; k < 2; ++k) {
            double z = head.bias[k];
            for (std::size_t j = 0; j < 4; ++j) z += head.weight[k * 4 + j] * hidden[t * 4 + j];
            CHECK(std::abs(out[t * 2 + k] - std::tanh(z)) <= 1e-12);
        }
    Tensor w = random_tensor({4, 2}, rng, false);
    auto loss = [&] { return probe_loss(output_head(hidden, head), w); };
    CHECK(gradient_error(head.weight, loss) < 1e-6);
    CHECK(gradient_error(head.bias, loss) < 1e-6);
    CHECK(gradient_error(hidden, loss) < 1e-6);
}

TEST_CASE("shape errors") {
    std::mt19937_64 rng(9);
    LstmLayer layer = random_layer(3, 2, rng);
    CHECK_THROWS_AS(lstm_forward(random_tensor({4, 2}, rng), layer), DimensionError);
    CHECK_THROWS_AS(lstm_forward(random_tensor({4}, rng), layer), DimensionError);
    LstmState bad = LstmState::zeros(3);
    CHECK_THROWS_AS(lstm_forward(random_tensor({4, 3}, rng), layer, &bad), DimensionError);
    layer.hidden_size = 5;
    CHECK_THROWS_AS(layer.validate(), DimensionError);
    CHECK_THROWS_AS(LstmStack::init(3, 2, 0, rng), ConfigurationError);
}
