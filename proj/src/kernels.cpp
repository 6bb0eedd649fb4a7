#include "stvedit/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

namespace stvedit::kernels {

/*============================== scalar reference ==============================*/

namespace ref {

void axpby(float a, const float* x, float b, const float* y, float* out, size_t n) {
    for (size_t i = 0; i < n; ++i)
        out[i] = a * x[i] + b * y[i];
}

void axpy(float a, const float* x, float* y, size_t n) {
    for (size_t i = 0; i < n; ++i)
        y[i] += a * x[i];
}

void affine(float a, float b, const float* x, float* out, size_t n) {
    for (size_t i = 0; i < n; ++i)
        out[i] = a * x[i] + b;
}

float dot(const float* x, const float* y, size_t n) {
    float acc = 0.0f;
    for (size_t i = 0; i < n; ++i)
        acc += x[i] * y[i];
    return acc;
}

float sum(const float* x, size_t n) {
    float acc = 0.0f;
    for (size_t i = 0; i < n; ++i)
        acc += x[i];
    return acc;
}

float sumsq(const float* x, size_t n) {
    float acc = 0.0f;
    for (size_t i = 0; i < n; ++i)
        acc += x[i] * x[i];
    return acc;
}

void silu(const float* x, float* out, size_t n) {
    for (size_t i = 0; i < n; ++i)
        out[i] = x[i] / (1.0f + std::exp(-x[i]));
}

void softmax_row(float* row, size_t n) {
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
    float inv = 1.0f / s;
    for (size_t i = 0; i < n; ++i)
        row[i] *= inv;
}

void gemm_nt(const float* A, const float* B, float* C, size_t m, size_t n, size_t k) {
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j)
            C[i * n + j] = dot(A + i * k, B + j * k, k);
}

void gemm_nn(const float* A, const float* B, float* C, size_t m, size_t n, size_t k) {
    for (size_t i = 0; i < m; ++i) {
        float* c = C + i * n;
        std::memset(c, 0, n * sizeof(float));
        for (size_t p = 0; p < k; ++p)
            axpy(A[i * k + p], B + p * n, c, n);
    }
}

} // namespace ref

/*============================== dispatch table ==============================*/

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

static const KernelTable kScalarTable = {
    ref::axpby, ref::axpy, ref::affine, ref::dot, ref::sum,
    ref::sumsq, ref::silu, ref::softmax_row, ref::gemm_nt, ref::gemm_nn,
};

// Provided by kernels_avx2.cpp / kernels_neon.cpp; null when the binary was
// built without that instruction set.
const KernelTable* avx2_table();
const KernelTable* neon_table();
bool cpu_has_avx2();

namespace {

struct Dispatch {
    const KernelTable* table;
    Backend backend;
};

Dispatch detect() {
    const char* env = std::getenv("STVEDIT_KERNELS");
    if (env != nullptr) {
        std::string want(env);
        if (want == "scalar")
            return {&kScalarTable, Backend::scalar};
        if (want == "avx2" && avx2_table() && cpu_has_avx2())
            return {avx2_table(), Backend::avx2};
        if (want == "neon" && neon_table())
            return {neon_table(), Backend::neon};
        // unknown or unsupported request: fall through to autodetect
    }
    if (avx2_table() && cpu_has_avx2())
        return {avx2_table(), Backend::avx2};
    if (neon_table())
        return {neon_table(), Backend::neon};
    return {&kScalarTable, Backend::scalar};
}

std::atomic<const KernelTable*> g_table{nullptr};
std::atomic<Backend> g_backend{Backend::scalar};

const KernelTable* table() {
    const KernelTable* t = g_table.load(std::memory_order_acquire);
    if (t == nullptr) {
        Dispatch d = detect();
        g_backend.store(d.backend, std::memory_order_relaxed);
        g_table.store(d.table, std::memory_order_release);
        t = d.table;
    }
    return t;
}

} // namespace

Backend active_backend() {
    table();
    return g_backend.load(std::memory_order_relaxed);
}

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
    }
    return "?";
}

bool backend_supported(Backend b) {
    switch (b) {
        case Backend::scalar: return true;
        case Backend::avx2: return avx2_table() != nullptr && cpu_has_avx2();
        case Backend::neon: return neon_table() != nullptr;
    }
    return false;
}

void force_backend(Backend b) {
    if (!backend_supported(b))
        throw std::invalid_argument(std::string("kernel backend not supported here: ") +
                                    backend_name(b));
    switch (b) {
        case Backend::scalar: g_table.store(&kScalarTable); break;
        case Backend::avx2: g_table.store(avx2_table()); break;
        case Backend::neon: g_table.store(neon_table()); break;
    }
    g_backend.store(b);
}

/*============================== public entry points ==============================*/

void axpby(float a, const float* x, float b, const float* y, float* out, size_t n) {
    table()->axpby(a, x, b, y, out, n);
}
void axpy(float a, const float* x, float* y, size_t n) { table()->axpy(a, x, y, n); }
void affine(float a, float b, const float* x, float* out, size_t n) {
    table()->affine(a, b, x, out, n);
}
float dot(const float* x, const float* y, size_t n) { return table()->dot(x, y, n); }
float sum(const float* x, size_t n) { return table()->sum(x, n); }
float sumsq(const float* x, size_t n) { return table()->sumsq(x, n); }
void silu(const float* x, float* out, size_t n) { table()->silu(x, out, n); }
void softmax_row(float* row, size_t n) { table()->softmax_row(row, n); }
void gemm_nt(const float* A, const float* B, float* C, size_t m, size_t n, size_t k) {
    table()->gemm_nt(A, B, C, m, n, k);
}
void gemm_nn(const float* A, const float* B, float* C, size_t m, size_t n, size_t k) {
    table()->gemm_nn(A, B, C, m, n, k);
}

} // namespace stvedit::kernels
