// NEON kernel variants for aarch64 builds. Compiled into the binary only
// when the target has NEON; selected at runtime by the dispatcher.

#include "stvedit/kernels.hpp"

#include <cmath>
#include <cstring>

#if defined(__ARM_NEON) || defined(__ARM_NEON__)
#define STVEDIT_HAVE_NEON_BUILD 1
#include <arm_neon.h>
#else
#define STVEDIT_HAVE_NEON_BUILD 0
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

#if STVEDIT_HAVE_NEON_BUILD

namespace {

inline float hsum128(float32x4_t v) {
#if defined(__aarch64__)
    return vaddvq_f32(v);
#else
    float32x2_t lo = vadd_f32(vget_low_f32(v), vget_high_f32(v));
    lo = vpadd_f32(lo, lo);
    return vget_lane_f32(lo, 0);
#endif
}

void axpby_neon(float a, const float* x, float b, const float* y, float* out, size_t n) {
    const float32x4_t va = vdupq_n_f32(a);
    const float32x4_t vb = vdupq_n_f32(b);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        float32x4_t r = vmulq_f32(va, vld1q_f32(x + i));
        r = vmlaq_f32(r, vb, vld1q_f32(y + i));
        vst1q_f32(out + i, r);
    }
    for (; i < n; ++i)
        out[i] = a * x[i] + b * y[i];
}

void axpy_neon(float a, const float* x, float* y, size_t n) {
    const float32x4_t va = vdupq_n_f32(a);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        vst1q_f32(y + i, vmlaq_f32(vld1q_f32(y + i), va, vld1q_f32(x + i)));
    for (; i < n; ++i)
        y[i] += a * x[i];
}

void affine_neon(float a, float b, const float* x, float* out, size_t n) {
    const float32x4_t va = vdupq_n_f32(a);
    const float32x4_t vb = vdupq_n_f32(b);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        vst1q_f32(out + i, vmlaq_f32(vb, va, vld1q_f32(x + i)));
    for (; i < n; ++i)
        out[i] = a * x[i] + b;
}

float dot_neon(const float* x, const float* y, size_t n) {
    float32x4_t acc = vdupq_n_f32(0.0f);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = vmlaq_f32(acc, vld1q_f32(x + i), vld1q_f32(y + i));
    float r = hsum128(acc);
    for (; i < n; ++i)
        r += x[i] * y[i];
    return r;
}

float sum_neon(const float* x, size_t n) {
    float32x4_t acc = vdupq_n_f32(0.0f);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = vaddq_f32(acc, vld1q_f32(x + i));
    float r = hsum128(acc);
    for (; i < n; ++i)
        r += x[i];
    return r;
}

float sumsq_neon(const float* x, size_t n) {
    float32x4_t acc = vdupq_n_f32(0.0f);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        float32x4_t v = vld1q_f32(x + i);
        acc = vmlaq_f32(acc, v, v);
    }
    float r = hsum128(acc);
    for (; i < n; ++i)
        r += x[i] * x[i];
    return r;
}

void silu_neon(const float* x, float* out, size_t n) {
    for (size_t i = 0; i < n; ++i)
        out[i] = x[i] / (1.0f + std::exp(-x[i]));
}

void softmax_row_neon(float* row, size_t n) {
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
    for (size_t i = 0; i < n; ++i)
        row[i] *= inv;
}

void gemm_nt_neon(const float* A, const float* B, float* C, size_t m, size_t n, size_t k) {
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j)
            C[i * n + j] = dot_neon(A + i * k, B + j * k, k);
}

void gemm_nn_neon(const float* A, const float* B, float* C, size_t m, size_t n, size_t k) {
    for (size_t i = 0; i < m; ++i) {
        float* c = C + i * n;
        std::memset(c, 0, n * sizeof(float));
        for (size_t p = 0; p < k; ++p)
            axpy_neon(A[i * k + p], B + p * n, c, n);
    }
}

const KernelTable kNeonTable = {
    axpby_neon, axpy_neon, affine_neon, dot_neon, sum_neon,
    sumsq_neon, silu_neon, softmax_row_neon, gemm_nt_neon, gemm_nn_neon,
};

} // namespace

const KernelTable* neon_table() { return &kNeonTable; }

#else

const KernelTable* neon_table() { return nullptr; }

#endif

} // namespace stvedit::kernels
