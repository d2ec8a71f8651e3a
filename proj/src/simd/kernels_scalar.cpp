#include "affect/simd/kernels.hpp"

namespace affect::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void correlate_scalar(const double* x, const double* w, std::size_t taps, double* y,
                      std::size_t n) {
    for (std::size_t t = 0; t < n; ++t) {
        double s = 0.0;
        for (std::size_t m = 0; m < taps; ++m) s += w[m] * x[t + m];
        y[t] += s;
    }
}

}  // namespace

const KernelSet& scalar_kernels() {
    static const KernelSet set{Isa::scalar, "scalar", dot_scalar, axpy_scalar, correlate_scalar};
    return set;
}

}  // namespace affect::simd
