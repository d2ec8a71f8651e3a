#include "affect/recurrent/lstm.hpp"

#include <cmath>
#include <string>

#include "affect/error.hpp"
#include "affect/simd/kernels.hpp"

namespace affect::recurrent {
namespace {

Tensor normal_tensor(Shape shape, double stddev, Rng& rng) {
    std::normal_distribution<double> normal(0.0, stddev);
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = normal(rng);
    return Tensor::from(std::move(shape), std::move(data), true);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Everything the backward pass needs from the forward recurrence.
struct Saved {
    std::size_t steps, in, hid;
    std::vector<double> gates;   // T x 4H post-activation
    std::vector<double> cells;   // (T + 1) x H, row 0 is the initial cell state
    std::vector<double> hidden;  // (T + 1) x H, row 0 is the initial hidden state
};

}  // namespace

void LstmLayer::validate() const {
    const std::size_t g = 4 * hidden_size;
    if (w_ih.shape() != Shape{g, input_size} || w_hh.shape() != Shape{g, hidden_size} || bias.shape() != Shape{g}) {
        throw DimensionError("lstm layer blocks " + shape_string(w_ih.shape()) + ", " + shape_string(w_hh.shape()) + ", " +
                             shape_string(bias.shape()) + " inconsistent with input " + std::to_string(input_size) +
                             " / hidden " + std::to_string(hidden_size));
    }
}

LstmLayer LstmLayer::init(std::size_t input_size, std::size_t hidden_size, Rng& rng) {
    LstmLayer layer;
    layer.input_size = input_size;
    layer.hidden_size = hidden_size;
    layer.w_ih = normal_tensor({4 * hidden_size, input_size}, 1.0 / std::sqrt(static_cast<double>(input_size)), rng);
    layer.w_hh = normal_tensor({4 * hidden_size, hidden_size}, 1.0 / std::sqrt(static_cast<double>(hidden_size)), rng);
    std::vector<double> b(4 * hidden_size, 0.0);
    for (std::size_t j = hidden_size; j < 2 * hidden_size; ++j) b[j] = 1.0;
    layer.bias = Tensor::from({4 * hidden_size}, std::move(b), true);
    return layer;
}

LstmLayer LstmLayer::zeros(std::size_t input_size, std::size_t hidden_size) {
    LstmLayer layer;
    layer.input_size = input_size;
    layer.hidden_size = hidden_size;
    layer.w_ih = Tensor::zeros({4 * hidden_size, input_size}, true);
    layer.w_hh = Tensor::zeros({4 * hidden_size, hidden_size}, true);
    layer.bias = Tensor::zeros({4 * hidden_size}, true);
    return layer;
}

std::vector<double> ActivationTrace::cell_series(std::size_t cell) const {
    std::vector<double> s(steps);
    for (std::size_t t = 0; t < steps; ++t) s[t] = h(t, cell);
    return s;
}

LstmOutput lstm_forward(const Tensor& seq, const LstmLayer& layer, const LstmState* initial) {
    layer.validate();
    if (seq.rank() != 2 || seq.dim(1) != layer.input_size) {
        throw DimensionError("lstm: input " + shape_string(seq.shape()) + " does not match input size " +
                             std::to_string(layer.input_size));
    }
    const std::size_t steps = seq.dim(0), in = layer.input_size, hid = layer.hidden_size, g4 = 4 * hid;
    if (steps == 0) throw DimensionError("lstm: empty sequence");
    if (initial && (initial->h.size() != hid || initial->c.size() != hid)) {
        throw DimensionError("lstm: initial state width does not match hidden size");
    }

    const auto& k = simd::active();
    const auto x = seq.data();
    const auto w_ih = layer.w_ih.data();
    const auto w_hh = layer.w_hh.data();
    const auto b = layer.bias.data();

    auto saved = std::make_shared<Saved>();
    saved->steps = steps;
    saved->in = in;
    saved->hid = hid;
    saved->gates.resize(steps * g4);
    saved->cells.assign((steps + 1) * hid, 0.0);
    saved->hidden.assign((steps + 1) * hid, 0.0);
    if (initial) {
        std::copy(initial->h.begin(), initial->h.end(), saved->hidden.begin());
        std::copy(initial->c.begin(), initial->c.end(), saved->cells.begin());
    }

    std::vector<double> z(g4);
    for (std::size_t t = 0; t < steps; ++t) {
        const double* xt = x.data() + t * in;
        const double* h_prev = saved->hidden.data() + t * hid;
        const double* c_prev = saved->cells.data() + t * hid;
        for (std::size_t r = 0; r < g4; ++r) {
            z[r] = b[r] + k.dot(w_ih.data() + r * in, xt, in) + k.dot(w_hh.data() + r * hid, h_prev, hid);
        }
        double* gt = saved->gates.data() + t * g4;
        double* c = saved->cells.data() + (t + 1) * hid;
        double* h = saved->hidden.data() + (t + 1) * hid;
        for (std::size_t j = 0; j < hid; ++j) {
            const double ig = sigmoid(z[j]);
            const double fg = sigmoid(z[hid + j]);
            const double cg = std::tanh(z[2 * hid + j]);
            const double og = sigmoid(z[3 * hid + j]);
            gt[j] = ig;
            gt[hid + j] = fg;
            gt[2 * hid + j] = cg;
            gt[3 * hid + j] = og;
            c[j] = fg * c_prev[j] + ig * cg;
            h[j] = og * std::tanh(c[j]);
        }
    }

    LstmOutput result;
    result.final_state.h.assign(saved->hidden.end() - static_cast<std::ptrdiff_t>(hid), saved->hidden.end());
    result.final_state.c.assign(saved->cells.end() - static_cast<std::ptrdiff_t>(hid), saved->cells.end());
    result.trace.steps = steps;
    result.trace.hidden = hid;
    result.trace.hidden_out.assign(saved->hidden.begin() + static_cast<std::ptrdiff_t>(hid), saved->hidden.end());
    result.trace.gates = saved->gates;

    const bool record = active_tape() != nullptr && (seq.requires_grad() || layer.w_ih.requires_grad() ||
                                                     layer.w_hh.requires_grad() || layer.bias.requires_grad());
    result.outputs = Tensor::from({steps, hid}, result.trace.hidden_out, record);
    if (!record) return result;

    const Tensor w_ih_t = layer.w_ih, w_hh_t = layer.w_hh, bias_t = layer.bias;
    active_tape()->record({seq, w_ih_t, w_hh_t, bias_t}, result.outputs,
                          [seq, w_ih_t, w_hh_t, bias_t, saved](std::span<const double> g_out, GradTable& grads) {
                              const auto& k = simd::active();
                              const std::size_t steps = saved->steps, in = saved->in, hid = saved->hid, g4 = 4 * hid;
                              const auto w_ih = w_ih_t.data();
                              const auto w_hh = w_hh_t.data();
                              std::vector<double> dz_all(steps * g4);
                              std::vector<double> dh_next(hid, 0.0), dc_next(hid, 0.0), dh_prev(hid);
                              std::vector<double>* gw_hh = w_hh_t.requires_grad() ? &grads.at(w_hh_t) : nullptr;
                              for (std::size_t tt = steps; tt-- > 0;) {
                                  const double* gt = saved->gates.data() + tt * g4;
                                  const double* c = saved->cells.data() + (tt + 1) * hid;
                                  const double* c_prev = saved->cells.data() + tt * hid;
                                  const double* h_prev = saved->hidden.data() + tt * hid;
                                  double* dz = dz_all.data() + tt * g4;
                                  for (std::size_t j = 0; j < hid; ++j) {
                                      const double ig = gt[j], fg = gt[hid + j], cg = gt[2 * hid + j], og = gt[3 * hid + j];
                                      const double tc = std::tanh(c[j]);
                                      const double dh = g_out[tt * hid + j] + dh_next[j];
                                      const double dc = dh * og * (1.0 - tc * tc) + dc_next[j];
                                      dz[j] = dc * cg * ig * (1.0 - ig);
                                      dz[hid + j] = dc * c_prev[j] * fg * (1.0 - fg);
                                      dz[2 * hid + j] = dc * ig * (1.0 - cg * cg);
                                      dz[3 * hid + j] = dh * tc * og * (1.0 - og);
                                      dc_next[j] = dc * fg;
                                  }
                                  std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
                                  for (std::size_t r = 0; r < g4; ++r) {
                                      if (dz[r] == 0.0) continue;
                                      k.axpy(dz[r], w_hh.data() + r * hid, dh_prev.data(), hid);
                                      if (gw_hh) k.axpy(dz[r], h_prev, gw_hh->data() + r * hid, hid);
                                  }
                                  dh_next.swap(dh_prev);
                              }
                              if (bias_t.requires_grad()) {
                                  auto& gb = grads.at(bias_t);
                                  for (std::size_t t = 0; t < steps; ++t)
                                      for (std::size_t r = 0; r < g4; ++r) gb[r] += dz_all[t * g4 + r];
                              }
                              if (w_ih_t.requires_grad()) {
                                  auto& gw = grads.at(w_ih_t);
                                  const auto x = seq.data();
                                  for (std::size_t t = 0; t < steps; ++t)
                                      for (std::size_t r = 0; r < g4; ++r) {
                                          const double d = dz_all[t * g4 + r];
                                          if (d != 0.0) k.axpy(d, x.data() + t * in, gw.data() + r * in, in);
                                      }
                              }
                              if (seq.requires_grad()) {
                                  auto& gx = grads.at(seq);
                                  for (std::size_t t = 0; t < steps; ++t)
                                      for (std::size_t r = 0; r < g4; ++r) {
                                          const double d = dz_all[t * g4 + r];
                                          if (d != 0.0) k.axpy(d, w_ih.data() + r * in, gx.data() + t * in, in);
                                      }
                              }
                          });
    return result;
}

LstmStack LstmStack::init(std::size_t input_size, std::size_t hidden_size, std::size_t depth, Rng& rng) {
    if (depth == 0) throw ConfigurationError("lstm stack needs at least one layer");
    LstmStack stack;
    for (std::size_t l = 0; l < depth; ++l) {
        stack.layers.push_back(LstmLayer::init(l == 0 ? input_size : hidden_size, hidden_size, rng));
    }
    return stack;
}

std::vector<Tensor> LstmStack::parameters() const {
    std::vector<Tensor> out;
    for (const auto& l : layers) {
        auto p = l.parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

StackOutput stack_forward(const Tensor& seq, const LstmStack& stack) {
    if (stack.layers.empty()) throw ConfigurationError("empty lstm stack");
    StackOutput out;
    Tensor current = seq;
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        if (l > 0 && stack.layers[l].input_size != stack.layers[l - 1].hidden_size) {
            throw DimensionError("lstm stack: layer " + std::to_string(l) + " input size does not match previous hidden size");
        }
        LstmOutput step = lstm_forward(current, stack.layers[l]);
        current = step.outputs;
        out.traces.push_back(std::move(step.trace));
    }
    out.outputs = current;
    return out;
}

OutputHead OutputHead::init(std::size_t hidden_size, Rng& rng) {
    OutputHead head;
    head.weight = normal_tensor({2, hidden_size}, 1.0 / std::sqrt(static_cast<double>(hidden_size)), rng);
    head.bias = Tensor::zeros({2}, true);
    return head;
}

Tensor output_head(const Tensor& hidden, const OutputHead& head) {
    return affect::tanh(linear(hidden, head.weight, head.bias));
}

}  // namespace affect::recurrent
