#pragma once

// Inner-loop arithmetic kernels with scalar, AVX2 and AVX-512 variants.
//
// Every convolution, linear map and recurrent step in the library bottoms out
// in one of three primitives below. The variant is chosen once at startup from
// the CPU feature set (or the AFFECT_E2E_SIMD environment variable) and can be
// switched explicitly for equivalence testing.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace affect::simd {

enum class Isa { scalar, avx2, avx512 };

struct KernelSet {
    Isa isa;
    const char* name;
    // sum_i a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // y[t] += sum_{m < taps} w[m] * x[t + m]   for t < n; x holds n + taps - 1 values
    void (*correlate)(const double* x, const double* w, std::size_t taps, double* y,
                      std::size_t n);
};

const KernelSet& scalar_kernels();
#if defined(AFFECT_HAVE_X86_KERNELS)
const KernelSet& avx2_kernels();
const KernelSet& avx512_kernels();
#endif

bool isa_supported(Isa isa);
Isa best_isa();
std::vector<Isa> supported_isas();

const KernelSet& kernels_for(Isa isa);
const KernelSet& active();
void select(Isa isa);

std::string_view isa_name(Isa isa);
Isa parse_isa(std::string_view name);

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace affect::simd
