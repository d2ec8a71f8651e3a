#include "affect/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "affect/error.hpp"
#include "affect/simd/kernels.hpp"

namespace affect {
namespace {

// Creates the output tensor and, when needed, records the op.
Tensor emit(Shape shape, std::vector<double> data, std::vector<Tensor> inputs, Tape::BackwardFn fn) {
    bool record = false;
    if (active_tape() != nullptr) {
        for (const auto& in : inputs) record = record || in.requires_grad();
    }
    Tensor out = Tensor::from(std::move(shape), std::move(data), record);
    if (record) active_tape()->record(std::move(inputs), out, std::move(fn));
    return out;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
    if (t.rank() != rank) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + " tensor, got " +
                             shape_string(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                             shape_string(b.shape()));
    }
}

// Rows of `x` ([C x T]) zero-padded to T + left + right.
std::vector<double> pad_rows(std::span<const double> x, std::size_t rows, std::size_t cols, std::size_t left,
                             std::size_t right) {
    const std::size_t width = cols + left + right;
    std::vector<double> out(rows * width, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(r * cols), cols, out.begin() + static_cast<std::ptrdiff_t>(r * width + left));
    }
    return out;
}

struct Conv2dGeometry {
    std::size_t cin, h, w, cout, kh, kw, stride;
    Pad2d pad;
    std::size_t hout, wout;
    std::size_t patch() const { return cin * kh * kw; }
    std::size_t pixels() const { return hout * wout; }
    bool pointwise() const {
        return kh == 1 && kw == 1 && stride == 1 && pad.top == 0 && pad.bottom == 0 && pad.left == 0 &&
               pad.right == 0;
    }
};

// cols[(k*kh + i)*kw + j][oy*wout + ox] = x[k][oy*s + i - top][ox*s + j - left]
std::vector<double> im2col(std::span<const double> x, const Conv2dGeometry& g) {
    std::vector<double> cols(g.patch() * g.pixels(), 0.0);
    for (std::size_t k = 0; k < g.cin; ++k) {
        for (std::size_t i = 0; i < g.kh; ++i) {
            for (std::size_t j = 0; j < g.kw; ++j) {
                double* row = cols.data() + ((k * g.kh + i) * g.kw + j) * g.pixels();
                for (std::size_t oy = 0; oy < g.hout; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + i) -
                                              static_cast<std::ptrdiff_t>(g.pad.top);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    const double* src = x.data() + (k * g.h + static_cast<std::size_t>(iy)) * g.w;
                    for (std::size_t ox = 0; ox < g.wout; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + j) -
                                                  static_cast<std::ptrdiff_t>(g.pad.left);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
                        row[oy * g.wout + ox] = src[ix];
                    }
                }
            }
        }
    }
    return cols;
}

void col2im_accumulate(std::span<const double> cols, const Conv2dGeometry& g, std::span<double> gx) {
    for (std::size_t k = 0; k < g.cin; ++k) {
        for (std::size_t i = 0; i < g.kh; ++i) {
            for (std::size_t j = 0; j < g.kw; ++j) {
                const double* row = cols.data() + ((k * g.kh + i) * g.kw + j) * g.pixels();
                for (std::size_t oy = 0; oy < g.hout; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + i) -
                                              static_cast<std::ptrdiff_t>(g.pad.top);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    double* dst = gx.data() + (k * g.h + static_cast<std::size_t>(iy)) * g.w;
                    for (std::size_t ox = 0; ox < g.wout; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + j) -
                                                  static_cast<std::ptrdiff_t>(g.pad.left);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
                        dst[ix] += row[oy * g.wout + ox];
                    }
                }
            }
        }
    }
}

template <typename F>
Tensor unary(const Tensor& a, F&& value_and_slope) {
    std::vector<double> out(a.numel());
    std::vector<double> slope(a.numel());
    const auto x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) value_and_slope(x[i], out[i], slope[i]);
    return emit(a.shape(), std::move(out), {a}, [a, slope = std::move(slope)](std::span<const double> g, GradTable& grads) {
        auto& ga = grads.at(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * slope[i];
    });
}

}  // namespace

std::pair<std::size_t, std::size_t> same_padding(std::size_t n, std::size_t kernel, std::size_t stride) {
    const std::size_t out = (n + stride - 1) / stride;
    const std::size_t needed = (out - 1) * stride + kernel;
    const std::size_t total = needed > n ? needed - n : 0;
    return {total / 2, total - total / 2};
}

Tensor conv1d(const Tensor& input, const Tensor& kernels, std::size_t stride, Padding padding) {
    require_rank(input, 2, "conv1d");
    require_rank(kernels, 3, "conv1d");
    if (stride == 0) throw ParameterError("conv1d: stride must be positive");
    const std::size_t cin = input.dim(0), t_in = input.dim(1);
    const std::size_t cout = kernels.dim(0), taps = kernels.dim(2);
    if (kernels.dim(1) != cin) {
        throw DimensionError("conv1d: input has " + std::to_string(cin) + " channels but kernels expect " +
                             std::to_string(kernels.dim(1)));
    }
    auto [left, right] = padding == Padding::same ? same_padding(t_in, taps, stride) : std::pair<std::size_t, std::size_t>{0, 0};
    const std::size_t width = t_in + left + right;
    if (taps == 0 || taps > width) {
        throw DimensionError("conv1d: kernel length " + std::to_string(taps) + " exceeds padded input " +
                             std::to_string(width));
    }
    const std::size_t t_out = (width - taps) / stride + 1;

    const auto& k = simd::active();
    const std::vector<double> xp = pad_rows(input.data(), cin, t_in, left, right);
    const auto w = kernels.data();
    std::vector<double> out(cout * t_out, 0.0);
    for (std::size_t c = 0; c < cout; ++c) {
        double* y = out.data() + c * t_out;
        for (std::size_t ch = 0; ch < cin; ++ch) {
            const double* wk = w.data() + (c * cin + ch) * taps;
            const double* x = xp.data() + ch * width;
            if (stride == 1) {
                k.correlate(x, wk, taps, y, t_out);
            } else {
                for (std::size_t t = 0; t < t_out; ++t) y[t] += k.dot(wk, x + t * stride, taps);
            }
        }
    }

    return emit({cout, t_out}, std::move(out), {input, kernels},
                [input, kernels, stride, left = left, cin, t_in, cout, taps, width, t_out](std::span<const double> g,
                                                                                       GradTable& grads) {
                    const auto& k = simd::active();
                    const auto w = kernels.data();
                    const std::vector<double> xp = pad_rows(input.data(), cin, t_in, left, width - t_in - left);
                    if (kernels.requires_grad()) {
                        auto& gw = grads.at(kernels);
                        for (std::size_t c = 0; c < cout; ++c) {
                            const double* gc = g.data() + c * t_out;
                            for (std::size_t ch = 0; ch < cin; ++ch) {
                                const double* x = xp.data() + ch * width;
                                double* gwk = gw.data() + (c * cin + ch) * taps;
                                if (stride == 1) {
                                    for (std::size_t m = 0; m < taps; ++m) gwk[m] += k.dot(gc, x + m, t_out);
                                } else {
                                    for (std::size_t m = 0; m < taps; ++m) {
                                        double s = 0.0;
                                        for (std::size_t t = 0; t < t_out; ++t) s += gc[t] * x[t * stride + m];
                                        gwk[m] += s;
                                    }
                                }
                            }
                        }
                    }
                    if (input.requires_grad()) {
                        std::vector<double> gxp(cin * width, 0.0);
                        if (stride == 1) {
                            // Full correlation of each output gradient with the flipped kernel.
                            const std::vector<double> gpad = pad_rows(g, cout, t_out, taps - 1, taps - 1);
                            const std::size_t gwidth = t_out + 2 * (taps - 1);
                            std::vector<double> flipped(taps);
                            for (std::size_t c = 0; c < cout; ++c) {
                                for (std::size_t ch = 0; ch < cin; ++ch) {
                                    const double* wk = w.data() + (c * cin + ch) * taps;
                                    std::reverse_copy(wk, wk + taps, flipped.begin());
                                    k.correlate(gpad.data() + c * gwidth, flipped.data(), taps,
                                                gxp.data() + ch * width, t_out + taps - 1);
                                }
                            }
                        } else {
                            for (std::size_t c = 0; c < cout; ++c) {
                                const double* gc = g.data() + c * t_out;
                                for (std::size_t ch = 0; ch < cin; ++ch) {
                                    const double* wk = w.data() + (c * cin + ch) * taps;
                                    double* gx = gxp.data() + ch * width;
                                    for (std::size_t t = 0; t < t_out; ++t) k.axpy(gc[t], wk, gx + t * stride, taps);
                                }
                            }
                        }
                        auto& gi = grads.at(input);
                        for (std::size_t ch = 0; ch < cin; ++ch) {
                            for (std::size_t t = 0; t < t_in; ++t) gi[ch * t_in + t] += gxp[ch * width + left + t];
                        }
                    }
                });
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride, Padding padding) {
    require_rank(input, 3, "conv2d");
    require_rank(kernels, 4, "conv2d");
    if (padding == Padding::valid) return conv2d(input, kernels, stride, Pad2d{});
    if (stride == 0) throw ParameterError("conv2d: stride must be positive");
    auto [top, bottom] = same_padding(input.dim(1), kernels.dim(2), stride);
    auto [left, right] = same_padding(input.dim(2), kernels.dim(3), stride);
    return conv2d(input, kernels, stride, Pad2d{top, bottom, left, right});
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride, Pad2d pad) {
    require_rank(input, 3, "conv2d");
    require_rank(kernels, 4, "conv2d");
    if (stride == 0) throw ParameterError("conv2d: stride must be positive");
    if (kernels.dim(1) != input.dim(0)) {
        throw DimensionError("conv2d: input has " + std::to_string(input.dim(0)) + " channels but kernels expect " +
                             std::to_string(kernels.dim(1)));
    }
    Conv2dGeometry geo{input.dim(0), input.dim(1), input.dim(2), kernels.dim(0), kernels.dim(2), kernels.dim(3),
                       stride, pad, 0, 0};
    const std::size_t hp = geo.h + pad.top + pad.bottom, wp = geo.w + pad.left + pad.right;
    if (geo.kh == 0 || geo.kw == 0 || geo.kh > hp || geo.kw > wp) {
        throw DimensionError("conv2d: kernel " + shape_string(kernels.shape()) + " does not fit padded input " +
                             shape_string(input.shape()));
    }
    geo.hout = (hp - geo.kh) / stride + 1;
    geo.wout = (wp - geo.kw) / stride + 1;

    const auto& k = simd::active();
    const std::vector<double> cols = geo.pointwise() ? std::vector<double>(input.data().begin(), input.data().end())
                                                     : im2col(input.data(), geo);
    const auto w = kernels.data();
    const std::size_t patch = geo.patch(), pixels = geo.pixels();
    std::vector<double> out(geo.cout * pixels, 0.0);
    for (std::size_t c = 0; c < geo.cout; ++c) {
        double* y = out.data() + c * pixels;
        for (std::size_t r = 0; r < patch; ++r) {
            const double wr = w[c * patch + r];
            if (wr != 0.0) k.axpy(wr, cols.data() + r * pixels, y, pixels);
        }
    }

    return emit({geo.cout, geo.hout, geo.wout}, std::move(out), {input, kernels},
                [input, kernels, geo](std::span<const double> g, GradTable& grads) {
                    const auto& k = simd::active();
                    const std::size_t patch = geo.patch(), pixels = geo.pixels();
                    const auto w = kernels.data();
                    if (kernels.requires_grad()) {
                        const std::vector<double> cols = geo.pointwise()
                                                             ? std::vector<double>(input.data().begin(), input.data().end())
                                                             : im2col(input.data(), geo);
                        auto& gw = grads.at(kernels);
                        for (std::size_t c = 0; c < geo.cout; ++c) {
                            const double* gc = g.data() + c * pixels;
                            for (std::size_t r = 0; r < patch; ++r) gw[c * patch + r] += k.dot(gc, cols.data() + r * pixels, pixels);
                        }
                    }
                    if (input.requires_grad()) {
                        auto& gi = grads.at(input);
                        if (geo.pointwise()) {
                            for (std::size_t c = 0; c < geo.cout; ++c) {
                                const double* gc = g.data() + c * pixels;
                                for (std::size_t r = 0; r < patch; ++r) k.axpy(w[c * patch + r], gc, gi.data() + r * pixels, pixels);
                            }
                        } else {
                            std::vector<double> gcols(patch * pixels, 0.0);
                            for (std::size_t c = 0; c < geo.cout; ++c) {
                                const double* gc = g.data() + c * pixels;
                                for (std::size_t r = 0; r < patch; ++r) k.axpy(w[c * patch + r], gc, gcols.data() + r * pixels, pixels);
                            }
                            col2im_accumulate(gcols, geo, gi);
                        }
                    }
                });
}

Tensor half_wave_rectify(const Tensor& input) {
    return unary(input, [](double x, double& y, double& s) {
        y = x > 0.0 ? x : 0.0;
        s = x > 0.0 ? 1.0 : 0.0;
    });
}

Tensor tanh(const Tensor& a) {
    return unary(a, [](double x, double& y, double& s) {
        y = std::tanh(x);
        s = 1.0 - y * y;
    });
}

Tensor sigmoid(const Tensor& a) {
    return unary(a, [](double x, double& y, double& s) {
        y = 1.0 / (1.0 + std::exp(-x));
        s = y * (1.0 - y);
    });
}

Tensor scale(const Tensor& a, double factor) {
    return unary(a, [factor](double x, double& y, double& s) {
        y = factor * x;
        s = factor;
    });
}

Tensor max_pool_time(const Tensor& input, std::size_t pool) {
    require_rank(input, 2, "max_pool_time");
    if (pool == 0) throw ParameterError("max_pool_time: pool must be positive");
    const std::size_t c = input.dim(0), t = input.dim(1);
    if (t < pool) throw ParameterError("max_pool_time: sequence shorter than pool");
    const std::size_t t_out = t / pool;
    const auto x = input.data();
    std::vector<double> out(c * t_out);
    std::vector<std::size_t> arg(c * t_out);
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t i = 0; i < t_out; ++i) {
            std::size_t best = ch * t + i * pool;
            for (std::size_t j = 1; j < pool; ++j) {
                if (x[ch * t + i * pool + j] > x[best]) best = ch * t + i * pool + j;
            }
            out[ch * t_out + i] = x[best];
            arg[ch * t_out + i] = best;
        }
    }
    return emit({c, t_out}, std::move(out), {input}, [input, arg = std::move(arg)](std::span<const double> g, GradTable& grads) {
        auto& gi = grads.at(input);
        for (std::size_t i = 0; i < g.size(); ++i) gi[arg[i]] += g[i];
    });
}

Tensor max_pool_channels(const Tensor& input, std::size_t pool) {
    require_rank(input, 2, "max_pool_channels");
    if (pool == 0) throw ParameterError("max_pool_channels: pool must be positive");
    const std::size_t c = input.dim(0), t = input.dim(1);
    if (c % pool != 0) {
        throw ParameterError("max_pool_channels: " + std::to_string(c) + " channels not divisible by pool " +
                             std::to_string(pool));
    }
    const std::size_t c_out = c / pool;
    const auto x = input.data();
    std::vector<double> out(c_out * t);
    std::vector<std::size_t> arg(c_out * t);
    for (std::size_t grp = 0; grp < c_out; ++grp) {
        for (std::size_t i = 0; i < t; ++i) {
            std::size_t best = grp * pool * t + i;
            for (std::size_t j = 1; j < pool; ++j) {
                const std::size_t idx = (grp * pool + j) * t + i;
                if (x[idx] > x[best]) best = idx;
            }
            out[grp * t + i] = x[best];
            arg[grp * t + i] = best;
        }
    }
    return emit({c_out, t}, std::move(out), {input}, [input, arg = std::move(arg)](std::span<const double> g, GradTable& grads) {
        auto& gi = grads.at(input);
        for (std::size_t i = 0; i < g.size(); ++i) gi[arg[i]] += g[i];
    });
}

Tensor max_pool2d(const Tensor& input, std::size_t kernel, std::size_t stride, std::size_t pad) {
    require_rank(input, 3, "max_pool2d");
    if (kernel == 0 || stride == 0) throw ParameterError("max_pool2d: kernel and stride must be positive");
    const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
    if (kernel > h + 2 * pad || kernel > w + 2 * pad) throw DimensionError("max_pool2d: window exceeds padded input");
    const std::size_t hout = (h + 2 * pad - kernel) / stride + 1;
    const std::size_t wout = (w + 2 * pad - kernel) / stride + 1;
    const auto x = input.data();
    std::vector<double> out(c * hout * wout);
    std::vector<std::size_t> arg(out.size());
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t oy = 0; oy < hout; ++oy) {
            for (std::size_t ox = 0; ox < wout; ++ox) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t best_idx = 0;
                for (std::size_t i = 0; i < kernel; ++i) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + i) - static_cast<std::ptrdiff_t>(pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t j = 0; j < kernel; ++j) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + j) - static_cast<std::ptrdiff_t>(pad);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                        const std::size_t idx = (ch * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix);
                        if (x[idx] > best) {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                const std::size_t o = (ch * hout + oy) * wout + ox;
                out[o] = best;
                arg[o] = best_idx;
            }
        }
    }
    return emit({c, hout, wout}, std::move(out), {input}, [input, arg = std::move(arg)](std::span<const double> g, GradTable& grads) {
        auto& gi = grads.at(input);
        for (std::size_t i = 0; i < g.size(); ++i) gi[arg[i]] += g[i];
    });
}

Tensor dropout(const Tensor& input, double p, bool training, Rng& rng) {
    if (!(p >= 0.0) || p >= 1.0) throw ParameterError("dropout: probability must be in [0, 1)");
    if (!training || p == 0.0) return input;
    const double keep_scale = 1.0 / (1.0 - p);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<double> mask(input.numel());
    for (double& m : mask) m = uniform(rng) < p ? 0.0 : keep_scale;
    std::vector<double> out(input.numel());
    const auto x = input.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * mask[i];
    return emit(input.shape(), std::move(out), {input}, [input, mask = std::move(mask)](std::span<const double> g, GradTable& grads) {
        auto& gi = grads.at(input);
        for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * mask[i];
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return emit(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g, GradTable& grads) {
        for (const Tensor* t : {&a, &b}) {
            if (!t->requires_grad()) continue;
            auto& gt = grads.at(*t);
            for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return emit(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g, GradTable& grads) {
        if (a.requires_grad()) {
            auto& ga = grads.at(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
        }
        if (b.requires_grad()) {
            auto& gb = grads.at(b);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
        }
    });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return emit({}, {s}, {a}, [a](std::span<const double> g, GradTable& grads) {
        auto& ga = grads.at(a);
        for (double& v : ga) v += g[0];
    });
}

Tensor mean(const Tensor& a) {
    if (a.numel() == 0) throw DimensionError("mean of empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_rank(weight, 2, "linear");
    const bool vector_input = x.rank() == 1;
    if (!vector_input) require_rank(x, 2, "linear");
    const std::size_t rows = vector_input ? 1 : x.dim(0);
    const std::size_t in = vector_input ? x.dim(0) : x.dim(1);
    const std::size_t out_dim = weight.dim(0);
    if (weight.dim(1) != in) {
        throw DimensionError("linear: input width " + std::to_string(in) + " vs weight " + shape_string(weight.shape()));
    }
    const bool has_bias = bias.defined();
    if (has_bias && (bias.rank() != 1 || bias.dim(0) != out_dim)) {
        throw DimensionError("linear: bias shape " + shape_string(bias.shape()) + " does not match output width");
    }
    const auto& k = simd::active();
    const auto xd = x.data();
    const auto wd = weight.data();
    std::vector<double> out(rows * out_dim);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t o = 0; o < out_dim; ++o) {
            out[r * out_dim + o] = k.dot(xd.data() + r * in, wd.data() + o * in, in) + (has_bias ? bias[o] : 0.0);
        }
    }
    Shape shape = vector_input ? Shape{out_dim} : Shape{rows, out_dim};
    std::vector<Tensor> inputs{x, weight};
    if (has_bias) inputs.push_back(bias);
    return emit(std::move(shape), std::move(out), std::move(inputs),
                [x, weight, bias, rows, in, out_dim, has_bias](std::span<const double> g, GradTable& grads) {
                    const auto& k = simd::active();
                    if (x.requires_grad()) {
                        auto& gx = grads.at(x);
                        const auto wd = weight.data();
                        for (std::size_t r = 0; r < rows; ++r) {
                            for (std::size_t o = 0; o < out_dim; ++o) {
                                const double go = g[r * out_dim + o];
                                if (go != 0.0) k.axpy(go, wd.data() + o * in, gx.data() + r * in, in);
                            }
                        }
                    }
                    if (weight.requires_grad()) {
                        auto& gw = grads.at(weight);
                        const auto xd = x.data();
                        for (std::size_t r = 0; r < rows; ++r) {
                            for (std::size_t o = 0; o < out_dim; ++o) {
                                const double go = g[r * out_dim + o];
                                if (go != 0.0) k.axpy(go, xd.data() + r * in, gw.data() + o * in, in);
                            }
                        }
                    }
                    if (has_bias && bias.requires_grad()) {
                        auto& gb = grads.at(bias);
                        for (std::size_t r = 0; r < rows; ++r) {
                            for (std::size_t o = 0; o < out_dim; ++o) gb[o] += g[r * out_dim + o];
                        }
                    }
                });
}

Tensor global_avg_pool(const Tensor& input) {
    require_rank(input, 3, "global_avg_pool");
    const std::size_t c = input.dim(0), area = input.dim(1) * input.dim(2);
    const auto x = input.data();
    std::vector<double> out(c, 0.0);
    for (std::size_t ch = 0; ch < c; ++ch) {
        double s = 0.0;
        for (std::size_t i = 0; i < area; ++i) s += x[ch * area + i];
        out[ch] = s / static_cast<double>(area);
    }
    return emit({c}, std::move(out), {input}, [input, c, area](std::span<const double> g, GradTable& grads) {
        auto& gi = grads.at(input);
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double v = g[ch] / static_cast<double>(area);
            for (std::size_t i = 0; i < area; ++i) gi[ch * area + i] += v;
        }
    });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "concat_cols");
    require_rank(b, 2, "concat_cols");
    if (a.dim(0) != b.dim(0)) {
        throw DimensionError("concat_cols: row counts differ " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
    const std::size_t rows = a.dim(0), wa = a.dim(1), wb = b.dim(1), w = wa + wb;
    std::vector<double> out(rows * w);
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(r * wa), wa, out.begin() + static_cast<std::ptrdiff_t>(r * w));
        std::copy_n(b.data().begin() + static_cast<std::ptrdiff_t>(r * wb), wb, out.begin() + static_cast<std::ptrdiff_t>(r * w + wa));
    }
    return emit({rows, w}, std::move(out), {a, b}, [a, b, rows, wa, wb, w](std::span<const double> g, GradTable& grads) {
        if (a.requires_grad()) {
            auto& ga = grads.at(a);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < wa; ++j) ga[r * wa + j] += g[r * w + j];
        }
        if (b.requires_grad()) {
            auto& gb = grads.at(b);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < wb; ++j) gb[r * wb + j] += g[r * w + wa + j];
        }
    });
}

Tensor stack(std::span<const Tensor> rows) {
    if (rows.empty()) throw DimensionError("stack: no tensors");
    const Shape& inner = rows.front().shape();
    const std::size_t n = rows.front().numel();
    std::vector<double> out;
    out.reserve(rows.size() * n);
    for (const auto& r : rows) {
        if (r.shape() != inner) throw DimensionError("stack: inconsistent shapes " + shape_string(r.shape()));
        out.insert(out.end(), r.data().begin(), r.data().end());
    }
    Shape shape{rows.size()};
    shape.insert(shape.end(), inner.begin(), inner.end());
    std::vector<Tensor> inputs(rows.begin(), rows.end());
    return emit(std::move(shape), std::move(out), inputs, [inputs, n](std::span<const double> g, GradTable& grads) {
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            if (!inputs[i].requires_grad()) continue;
            auto& gi = grads.at(inputs[i]);
            for (std::size_t j = 0; j < n; ++j) gi[j] += g[i * n + j];
        }
    });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
    require_rank(x, 2, "slice_rows");
    if (begin > end || end > x.dim(0)) throw DimensionError("slice_rows: range out of bounds");
    const std::size_t w = x.dim(1);
    std::vector<double> out(x.data().begin() + static_cast<std::ptrdiff_t>(begin * w),
                            x.data().begin() + static_cast<std::ptrdiff_t>(end * w));
    return emit({end - begin, w}, std::move(out), {x}, [x, begin, w](std::span<const double> g, GradTable& grads) {
        auto& gx = grads.at(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[begin * w + i] += g[i];
    });
}

Tensor column(const Tensor& x, std::size_t j) {
    require_rank(x, 2, "column");
    if (j >= x.dim(1)) throw DimensionError("column: index out of range");
    const std::size_t rows = x.dim(0), w = x.dim(1);
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = x[r * w + j];
    return emit({rows}, std::move(out), {x}, [x, j, rows, w](std::span<const double> g, GradTable& grads) {
        auto& gx = grads.at(x);
        for (std::size_t r = 0; r < rows; ++r) gx[r * w + j] += g[r];
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw DimensionError("reshape: " + shape_string(x.shape()) + " to " + shape_string(shape));
    }
    std::vector<double> out(x.data().begin(), x.data().end());
    return emit(std::move(shape), std::move(out), {x}, [x](std::span<const double> g, GradTable& grads) {
        auto& gx = grads.at(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
}

Tensor gather(const Tensor& x, std::vector<std::size_t> indices, Shape shape) {
    if (shape_numel(shape) != indices.size()) throw DimensionError("gather: index count does not match shape");
    const auto xd = x.data();
    std::vector<double> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= xd.size()) throw DimensionError("gather: index out of range");
        out[i] = xd[indices[i]];
    }
    return emit(std::move(shape), std::move(out), {x}, [x, indices = std::move(indices)](std::span<const double> g, GradTable& grads) {
        auto& gx = grads.at(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[indices[i]] += g[i];
    });
}

}  // namespace affect
