#pragma once

// Differentiable operations. Each records itself on the thread's active tape
// when at least one input requires a gradient.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "affect/tensor/tensor.hpp"

namespace affect {

using Rng = std::mt19937_64;

enum class Padding { valid, same };

struct Pad2d {
    std::size_t top = 0, bottom = 0, left = 0, right = 0;
    static Pad2d uniform(std::size_t p) { return {p, p, p, p}; }
};

/// Zero padding before/after for "same" convolution along one axis: output
/// length ceil(n / stride), extra sample on the trailing side when odd.
std::pair<std::size_t, std::size_t> same_padding(std::size_t n, std::size_t kernel, std::size_t stride);

// input [C_in x T], kernels [C_out x C_in x K] -> [C_out x T_out]
Tensor conv1d(const Tensor& input, const Tensor& kernels, std::size_t stride, Padding padding);

// input [C_in x H x W], kernels [C_out x C_in x Kh x Kw] -> [C_out x H_out x W_out]
Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride, Pad2d pad);
Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride, Padding padding);

/// max(0, x); the subgradient at 0 is 0.
Tensor half_wave_rectify(const Tensor& input);

// [C x T] -> [C x floor(T / pool)]
Tensor max_pool_time(const Tensor& input, std::size_t pool);
// [C x T] -> [(C / pool) x T]
Tensor max_pool_channels(const Tensor& input, std::size_t pool);
// [C x H x W], window `kernel`, padded with -inf
Tensor max_pool2d(const Tensor& input, std::size_t kernel, std::size_t stride, std::size_t pad);

/// Inverted dropout: survivors are scaled by 1/(1-p) so evaluation is identity.
Tensor dropout(const Tensor& input, double p, bool training, Rng& rng);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// x [N x I] (or [I]), weight [O x I], bias [O] or undefined -> [N x O] (or [O])
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// [C x H x W] -> [C]
Tensor global_avg_pool(const Tensor& input);

// [T x A], [T x B] -> [T x (A + B)]
Tensor concat_cols(const Tensor& a, const Tensor& b);
// N tensors of identical shape S -> [N x S...]
Tensor stack(std::span<const Tensor> rows);
// [T x D] rows [begin, end)
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
// [T x K] -> [T]
Tensor column(const Tensor& x, std::size_t j);
// Same data, new shape of equal element count.
Tensor reshape(const Tensor& x, Shape shape);
// out[i] = x[indices[i]]
Tensor gather(const Tensor& x, std::vector<std::size_t> indices, Shape shape);

}  // namespace affect
