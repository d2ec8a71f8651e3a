// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include "affect/simd/kernels.hpp"

namespace affect::simd {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d s0 = _mm256_setzero_pd();
    __m256d s1 = _mm256_setzero_pd();
    __m256d s2 = _mm256_setzero_pd();
    __m256d s3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
        s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
        s2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), s2);
        s3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), s3);
    }
    for (; i + 4 <= n; i += 4) {
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
    }
    double s = hsum(_mm256_add_pd(_mm256_add_pd(s0, s1), _mm256_add_pd(s2, s3)));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
        _mm256_storeu_pd(y + i + 4,
                         _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
    }
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void correlate_avx2(const double* x, const double* w, std::size_t taps, double* y, std::size_t n) {
    std::size_t t = 0;
    // 32 outputs per block held in eight accumulators.
    for (; t + 32 <= n; t += 32) {
        __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
        __m256d a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
        __m256d a4 = _mm256_setzero_pd(), a5 = _mm256_setzero_pd();
        __m256d a6 = _mm256_setzero_pd(), a7 = _mm256_setzero_pd();
        const double* xb = x + t;
        for (std::size_t m = 0; m < taps; ++m) {
            const __m256d wm = _mm256_broadcast_sd(w + m);
            const double* xm = xb + m;
            a0 = _mm256_fmadd_pd(wm, _mm256_loadu_pd(xm), a0);
            a1 = _mm256_fmadd_pd(wm, _mm256_loadu_pd(xm + 4), a1);
            a2 = _mm256_fmadd_pd(wm, _mm256_loadu_pd(xm + 8), a2);
            a3 = _mm256_fmadd_pd(wm, _mm256_loadu_pd(xm + 12), a3);
            a4 = _mm256_fmadd_pd(wm, _mm256_loadu_pd(xm + 16), a4);
            a5 = _mm256_fmadd_pd(wm, _mm256_loadu_pd(xm + 20), a5);
            a6 = _mm256_fmadd_pd(wm, _mm256_loadu_pd(xm + 24), a6);
            a7 = _mm256_fmadd_pd(wm, _mm256_loadu_pd(xm + 28), a7);
        }
        double* yb = y + t;
        _mm256_storeu_pd(yb, _mm256_add_pd(_mm256_loadu_pd(yb), a0));
        _mm256_storeu_pd(yb + 4, _mm256_add_pd(_mm256_loadu_pd(yb + 4), a1));
        _mm256_storeu_pd(yb + 8, _mm256_add_pd(_mm256_loadu_pd(yb + 8), a2));
        _mm256_storeu_pd(yb + 12, _mm256_add_pd(_mm256_loadu_pd(yb + 12), a3));
        _mm256_storeu_pd(yb + 16, _mm256_add_pd(_mm256_loadu_pd(yb + 16), a4));
        _mm256_storeu_pd(yb + 20, _mm256_add_pd(_mm256_loadu_pd(yb + 20), a5));
        _mm256_storeu_pd(yb + 24, _mm256_add_pd(_mm256_loadu_pd(yb + 24), a6));
        _mm256_storeu_pd(yb + 28, _mm256_add_pd(_mm256_loadu_pd(yb + 28), a7));
    }
    for (; t + 4 <= n; t += 4) {
        __m256d a0 = _mm256_setzero_pd();
        for (std::size_t m = 0; m < taps; ++m) {
            a0 = _mm256_fmadd_pd(_mm256_broadcast_sd(w + m), _mm256_loadu_pd(x + t + m), a0);
        }
        _mm256_storeu_pd(y + t, _mm256_add_pd(_mm256_loadu_pd(y + t), a0));
    }
    for (; t < n; ++t) {
        double s = 0.0;
        for (std::size_t m = 0; m < taps; ++m) s += w[m] * x[t + m];
        y[t] += s;
    }
}

}  // namespace

const KernelSet& avx2_kernels() {
    static const KernelSet set{Isa::avx2, "avx2", dot_avx2, axpy_avx2, correlate_avx2};
    return set;
}

}  // namespace affect::simd
