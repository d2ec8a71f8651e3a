#pragma once

// Vanilla LSTM layers (no peepholes, no projection) recorded on the tape as a
// single fused op with backpropagation through time.
//
// Gate rows in the weight blocks are ordered input, forget, cell, output:
//   z_t = W_ih x_t + W_hh h_{t-1} + b
//   i = sigmoid(z_i), f = sigmoid(z_f), g = tanh(z_g), o = sigmoid(z_o)
//   c_t = f * c_{t-1} + i * g,  h_t = o * tanh(c_t)

#include <cstddef>
#include <vector>

#include "affect/tensor/ops.hpp"
#include "affect/tensor/tensor.hpp"

namespace affect::recurrent {

inline constexpr std::size_t kFullHiddenSize = 256;
inline constexpr std::size_t kFullLayers = 2;

struct LstmLayer {
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
    Tensor w_ih;  // [4H x D]
    Tensor w_hh;  // [4H x H]
    Tensor bias;  // [4H]

    /// Variance-scaled normal weights, forget-gate bias 1.0, other biases 0.
    static LstmLayer init(std::size_t input_size, std::size_t hidden_size, Rng& rng);
    static LstmLayer zeros(std::size_t input_size, std::size_t hidden_size);
    std::vector<Tensor> parameters() const { return {w_ih, w_hh, bias}; }
    void validate() const;
};

struct LstmState {
    std::vector<double> h;
    std::vector<double> c;
    static LstmState zeros(std::size_t hidden) { return {std::vector<double>(hidden, 0.0), std::vector<double>(hidden, 0.0)}; }
};

/// Per-step hidden outputs (T x H, row-major) and post-activation gate values
/// (T x 4H, same gate order as the weights).
struct ActivationTrace {
    std::size_t steps = 0;
    std::size_t hidden = 0;
    std::vector<double> hidden_out;
    std::vector<double> gates;

    double h(std::size_t t, std::size_t cell) const { return hidden_out[t * hidden + cell]; }
    std::vector<double> cell_series(std::size_t cell) const;
};

struct LstmOutput {
    Tensor outputs;  // [T x H]
    LstmState final_state;
    ActivationTrace trace;
};

/// `seq` is [T x D]. A null `initial` means zero state.
LstmOutput lstm_forward(const Tensor& seq, const LstmLayer& layer, const LstmState* initial = nullptr);

struct LstmStack {
    std::vector<LstmLayer> layers;

    static LstmStack init(std::size_t input_size, std::size_t hidden_size, std::size_t depth, Rng& rng);
    std::size_t input_size() const { return layers.front().input_size; }
    std::size_t hidden_size() const { return layers.back().hidden_size; }
    std::vector<Tensor> parameters() const;
};

struct StackOutput {
    Tensor outputs;
    std::vector<ActivationTrace> traces;  // one per layer
};

StackOutput stack_forward(const Tensor& seq, const LstmStack& stack);

/// Per-step linear map to (arousal, valence), squashed into (-1, 1).
struct OutputHead {
    Tensor weight;  // [2 x H]
    Tensor bias;    // [2]

    static OutputHead init(std::size_t hidden_size, Rng& rng);
    std::vector<Tensor> parameters() const { return {weight, bias}; }
};

// [T x H] -> [T x 2]
Tensor output_head(const Tensor& hidden, const OutputHead& head);

}  // namespace affect::recurrent
