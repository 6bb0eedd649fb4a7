// AVX2+FMA kernel variants. This translation unit is the only one compiled
// with -mavx2 -mfma; entry is taken only after a cpuid check, so the rest of
// the binary stays baseline-safe.

#include "stvedit/kernels.hpp"

#include <cmath>
#include <cstring>

#if defined(__x86_64__) || defined(_M_X64)
#define STVEDIT_HAVE_AVX2_BUILD 1
#include <immintrin.h>
#else
#define STVEDIT_HAVE_AVX2_BUILD 0
#endif

namespace stvedit::kernels {

struct KernelTable {
    void (*axpby)(float, const float*, float, const float*, float*, size_t);
    void (*axpy)(float, const float*, float*, size_t);
    void (*affine)(float, float, const float*, float*, size_t);
    float (*dot)(const float*, const float*, size_t);
    float (*sum)(const float*, size_t);
    float (*sumsq)(const float*, size_t);
    void (*silu)(const float*, float*, size_t);
    void (*softmax_row)(float*, size_t);
    void (*gemm_nt)(const float*, const float*, float*, size_t, size_t, size_t);
    void (*gemm_nn)(const float*, const float*, float*, size_t, size_t, size_t);
};

#if STVEDIT_HAVE_AVX2_BUILD

namespace {

inline float hsum256(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
    return _mm_cvtss_f32(lo);
}

void axpby_avx2(float a, const float* x, float b, const float* y, float* out, size_t n) {
    const __m256 va = _mm256_set1_ps(a);
    const __m256 vb = _mm256_set1_ps(b);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 r = _mm256_mul_ps(va, _mm256_loadu_ps(x + i));
        r = _mm256_fmadd_ps(vb, _mm256_loadu_ps(y + i), r);
        _mm256_storeu_ps(out + i, r);
    }
    for (; i < n; ++i)
        out[i] = a * x[i] + b * y[i];
}

void axpy_avx2(float a, const float* x, float* y, size_t n) {
    const __m256 va = _mm256_set1_ps(a);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 r = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i));
        _mm256_storeu_ps(y + i, r);
    }
    for (; i < n; ++i)
        y[i] += a * x[i];
}

void affine_avx2(float a, float b, const float* x, float* out, size_t n) {
    const __m256 va = _mm256_set1_ps(a);
    const __m256 vb = _mm256_set1_ps(b);
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vb));
    for (; i < n; ++i)
        out[i] = a * x[i] + b;
}

float dot_avx2(const float* x, const float* y, size_t n) {
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8), acc1);
    }
    for (; i + 8 <= n; i += 8)
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
    float r = hsum256(_mm256_add_ps(acc0, acc1));
    for (; i < n; ++i)
        r += x[i] * y[i];
    return r;
}

float sum_avx2(const float* x, size_t n) {
    __m256 acc = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
    float r = hsum256(acc);
    for (; i < n; ++i)
        r += x[i];
    return r;
}

float sumsq_avx2(const float* x, size_t n) {
    __m256 acc = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 v = _mm256_loadu_ps(x + i);
        acc = _mm256_fmadd_ps(v, v, acc);
    }
    float r = hsum256(acc);
    for (; i < n; ++i)
        r += x[i] * x[i];
    return r;
}

// exp stays scalar; the surrounding arithmetic is vectorized
void silu_avx2(const float* x, float* out, size_t n) {
    for (size_t i = 0; i < n; ++i)
        out[i] = x[i] / (1.0f + std::exp(-x[i]));
}

void softmax_row_avx2(float* row, size_t n) {
    if (n == 0)
        return;
    float m = row[0];
    for (size_t i = 1; i < n; ++i)
        m = row[i] > m ? row[i] : m;
    float s = 0.0f;
    for (size_t i = 0; i < n; ++i) {
        row[i] = std::exp(row[i] - m);
        s += row[i];
    }
    const float inv = 1.0f / s;
    const __m256 vinv = _mm256_set1_ps(inv);
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(row + i, _mm256_mul_ps(vinv, _mm256_loadu_ps(row + i)));
    for (; i < n; ++i)
        row[i] *= inv;
}

// 2x4 register block: two A rows share the four B-row loads.
void gemm_nt_avx2(const float* A, const float* B, float* C, size_t m, size_t n, size_t k) {
    size_t i = 0;
    for (; i + 2 <= m; i += 2) {
        const float* a0 = A + i * k;
        const float* a1 = a0 + k;
        float* c0 = C + i * n;
        float* c1 = c0 + n;
        size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            const float* b0 = B + (j + 0) * k;
            const float* b1 = B + (j + 1) * k;
            const float* b2 = B + (j + 2) * k;
            const float* b3 = B + (j + 3) * k;
            __m256 s00 = _mm256_setzero_ps(), s01 = _mm256_setzero_ps();
            __m256 s02 = _mm256_setzero_ps(), s03 = _mm256_setzero_ps();
            __m256 s10 = _mm256_setzero_ps(), s11 = _mm256_setzero_ps();
            __m256 s12 = _mm256_setzero_ps(), s13 = _mm256_setzero_ps();
            size_t p = 0;
            for (; p + 8 <= k; p += 8) {
                const __m256 va0 = _mm256_loadu_ps(a0 + p);
                const __m256 va1 = _mm256_loadu_ps(a1 + p);
                const __m256 vb0 = _mm256_loadu_ps(b0 + p);
                const __m256 vb1 = _mm256_loadu_ps(b1 + p);
                const __m256 vb2 = _mm256_loadu_ps(b2 + p);
                const __m256 vb3 = _mm256_loadu_ps(b3 + p);
                s00 = _mm256_fmadd_ps(va0, vb0, s00);
                s01 = _mm256_fmadd_ps(va0, vb1, s01);
                s02 = _mm256_fmadd_ps(va0, vb2, s02);
                s03 = _mm256_fmadd_ps(va0, vb3, s03);
                s10 = _mm256_fmadd_ps(va1, vb0, s10);
                s11 = _mm256_fmadd_ps(va1, vb1, s11);
                s12 = _mm256_fmadd_ps(va1, vb2, s12);
                s13 = _mm256_fmadd_ps(va1, vb3, s13);
            }
            float r00 = hsum256(s00), r01 = hsum256(s01), r02 = hsum256(s02),
                  r03 = hsum256(s03);
            float r10 = hsum256(s10), r11 = hsum256(s11), r12 = hsum256(s12),
                  r13 = hsum256(s13);
            for (; p < k; ++p) {
                r00 += a0[p] * b0[p];
                r01 += a0[p] * b1[p];
                r02 += a0[p] * b2[p];
                r03 += a0[p] * b3[p];
                r10 += a1[p] * b0[p];
                r11 += a1[p] * b1[p];
                r12 += a1[p] * b2[p];
                r13 += a1[p] * b3[p];
            }
            c0[j + 0] = r00;
            c0[j + 1] = r01;
            c0[j + 2] = r02;
            c0[j + 3] = r03;
            c1[j + 0] = r10;
            c1[j + 1] = r11;
            c1[j + 2] = r12;
            c1[j + 3] = r13;
        }
        for (; j < n; ++j) {
            c0[j] = dot_avx2(a0, B + j * k, k);
            c1[j] = dot_avx2(a1, B + j * k, k);
        }
    }
    for (; i < m; ++i) {
        const float* a = A + i * k;
        float* c = C + i * n;
        for (size_t j = 0; j < n; ++j)
            c[j] = dot_avx2(a, B + j * k, k);
    }
}

// One C row held in up to 8 accumulators while k streams by.
template <int NR>
void gemm_nn_row(const float* a, const float* B, float* c, size_t n, size_t k, size_t j0) {
    __m256 acc[NR];
    for (int q = 0; q < NR; ++q)
        acc[q] = _mm256_setzero_ps();
    const float* b = B + j0;
    for (size_t p = 0; p < k; ++p, b += n) {
        const __m256 va = _mm256_set1_ps(a[p]);
        for (int q = 0; q < NR; ++q)
            acc[q] = _mm256_fmadd_ps(va, _mm256_loadu_ps(b + 8 * q), acc[q]);
    }
    for (int q = 0; q < NR; ++q)
        _mm256_storeu_ps(c + j0 + 8 * q, acc[q]);
}

void gemm_nn_avx2(const float* A, const float* B, float* C, size_t m, size_t n, size_t k) {
    for (size_t i = 0; i < m; ++i) {
        const float* a = A + i * k;
        float* c = C + i * n;
        size_t j0 = 0;
        for (; j0 + 64 <= n; j0 += 64)
            gemm_nn_row<8>(a, B, c, n, k, j0);
        const size_t rem = n - j0;
        switch (rem / 8) {
            case 7: gemm_nn_row<7>(a, B, c, n, k, j0); j0 += 56; break;
            case 6: gemm_nn_row<6>(a, B, c, n, k, j0); j0 += 48; break;
            case 5: gemm_nn_row<5>(a, B, c, n, k, j0); j0 += 40; break;
            case 4: gemm_nn_row<4>(a, B, c, n, k, j0); j0 += 32; break;
            case 3: gemm_nn_row<3>(a, B, c, n, k, j0); j0 += 24; break;
            case 2: gemm_nn_row<2>(a, B, c, n, k, j0); j0 += 16; break;
            case 1: gemm_nn_row<1>(a, B, c, n, k, j0); j0 += 8; break;
            default: break;
        }
        for (; j0 < n; ++j0) {
            float s = 0.0f;
            for (size_t p = 0; p < k; ++p)
                s += a[p] * B[p * n + j0];
            c[j0] = s;
        }
    }
}

const KernelTable kAvx2Table = {
    axpby_avx2, axpy_avx2, affine_avx2, dot_avx2, sum_avx2,
    sumsq_avx2, silu_avx2, softmax_row_avx2, gemm_nt_avx2, gemm_nn_avx2,
};

} // namespace

const KernelTable* avx2_table() { return &kAvx2Table; }

bool cpu_has_avx2() {
#if defined(__GNUC__) || defined(__clang__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

#else // !STVEDIT_HAVE_AVX2_BUILD

const KernelTable* avx2_table() { return nullptr; }
bool cpu_has_avx2() { return false; }

#endif

} // namespace stvedit::kernels
