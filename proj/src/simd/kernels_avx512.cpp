// Compiled with -mavx512f -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include "affect/simd/kernels.hpp"

namespace affect::simd {
namespace {

double dot_avx512(const double* a, const double* b, std::size_t n) {
    __m512d s0 = _mm512_setzero_pd();
    __m512d s1 = _mm512_setzero_pd();
    __m512d s2 = _mm512_setzero_pd();
    __m512d s3 = _mm512_setzero_pd();
    std::size_t i = 0;
    for (; i + 32 <= n; i += 32) {
        s0 = _mm512_fmadd_pd(_mm512_loadu_pd(a + i), _mm512_loadu_pd(b + i), s0);
        s1 = _mm512_fmadd_pd(_mm512_loadu_pd(a + i + 8), _mm512_loadu_pd(b + i + 8), s1);
        s2 = _mm512_fmadd_pd(_mm512_loadu_pd(a + i + 16), _mm512_loadu_pd(b + i + 16), s2);
        s3 = _mm512_fmadd_pd(_mm512_loadu_pd(a + i + 24), _mm512_loadu_pd(b + i + 24), s3);
    }
    for (; i + 8 <= n; i += 8) {
        s0 = _mm512_fmadd_pd(_mm512_loadu_pd(a + i), _mm512_loadu_pd(b + i), s0);
    }
    if (i < n) {
        const __mmask8 k = static_cast<__mmask8>((1u << (n - i)) - 1u);
        s1 = _mm512_fmadd_pd(_mm512_maskz_loadu_pd(k, a + i), _mm512_maskz_loadu_pd(k, b + i), s1);
    }
    return _mm512_reduce_add_pd(_mm512_add_pd(_mm512_add_pd(s0, s1), _mm512_add_pd(s2, s3)));
}

void axpy_avx512(double alpha, const double* x, double* y, std::size_t n) {
    const __m512d va = _mm512_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm512_storeu_pd(y + i, _mm512_fmadd_pd(va, _mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i)));
    }
    if (i < n) {
        const __mmask8 k = static_cast<__mmask8>((1u << (n - i)) - 1u);
        const __m512d r =
            _mm512_fmadd_pd(va, _mm512_maskz_loadu_pd(k, x + i), _mm512_maskz_loadu_pd(k, y + i));
        _mm512_mask_storeu_pd(y + i, k, r);
    }
}

void correlate_avx512(const double* x, const double* w, std::size_t taps, double* y,
                      std::size_t n) {
    std::size_t t = 0;
    for (; t + 64 <= n; t += 64) {
        __m512d a0 = _mm512_setzero_pd(), a1 = _mm512_setzero_pd();
        __m512d a2 = _mm512_setzero_pd(), a3 = _mm512_setzero_pd();
        __m512d a4 = _mm512_setzero_pd(), a5 = _mm512_setzero_pd();
        __m512d a6 = _mm512_setzero_pd(), a7 = _mm512_setzero_pd();
        const double* xb = x + t;
        for (std::size_t m = 0; m < taps; ++m) {
            const __m512d wm = _mm512_set1_pd(w[m]);
            const double* xm = xb + m;
            a0 = _mm512_fmadd_pd(wm, _mm512_loadu_pd(xm), a0);
            a1 = _mm512_fmadd_pd(wm, _mm512_loadu_pd(xm + 8), a1);
            a2 = _mm512_fmadd_pd(wm, _mm512_loadu_pd(xm + 16), a2);
            a3 = _mm512_fmadd_pd(wm, _mm512_loadu_pd(xm + 24), a3);
            a4 = _mm512_fmadd_pd(wm, _mm512_loadu_pd(xm + 32), a4);
            a5 = _mm512_fmadd_pd(wm, _mm512_loadu_pd(xm + 40), a5);
            a6 = _mm512_fmadd_pd(wm, _mm512_loadu_pd(xm + 48), a6);
            a7 = _mm512_fmadd_pd(wm, _mm512_loadu_pd(xm + 56), a7);
        }
        double* yb = y + t;
        _mm512_storeu_pd(yb, _mm512_add_pd(_mm512_loadu_pd(yb), a0));
        _mm512_storeu_pd(yb + 8, _mm512_add_pd(_mm512_loadu_pd(yb + 8), a1));
        _mm512_storeu_pd(yb + 16, _mm512_add_pd(_mm512_loadu_pd(yb + 16), a2));
        _mm512_storeu_pd(yb + 24, _mm512_add_pd(_mm512_loadu_pd(yb + 24), a3));
        _mm512_storeu_pd(yb + 32, _mm512_add_pd(_mm512_loadu_pd(yb + 32), a4));
        _mm512_storeu_pd(yb + 40, _mm512_add_pd(_mm512_loadu_pd(yb + 40), a5));
        _mm512_storeu_pd(yb + 48, _mm512_add_pd(_mm512_loadu_pd(yb + 48), a6));
        _mm512_storeu_pd(yb + 56, _mm512_add_pd(_mm512_loadu_pd(yb + 56), a7));
    }
    for (; t + 8 <= n; t += 8) {
        __m512d a0 = _mm512_setzero_pd();
        for (std::size_t m = 0; m < taps; ++m) {
            a0 = _mm512_fmadd_pd(_mm512_set1_pd(w[m]), _mm512_loadu_pd(x + t + m), a0);
        }
        _mm512_storeu_pd(y + t, _mm512_add_pd(_mm512_loadu_pd(y + t), a0));
    }
    for (; t < n; ++t) {
        double s = 0.0;
        for (std::size_t m = 0; m < taps; ++m) s += w[m] * x[t + m];
        y[t] += s;
    }
}

}  // namespace

const KernelSet& avx512_kernels() {
    static const KernelSet set{Isa::avx512, "avx512", dot_avx512, axpy_avx512, correlate_avx512};
    return set;
}

}  // namespace affect::simd
