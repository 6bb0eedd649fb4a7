#pragma once

#include <cstddef>

// Data-parallel inner loops shared by the whole engine: fused scale/add,
// reductions, row softmax and small GEMMs. Scalar reference implementations
// live in kernels::ref; AVX2/NEON variants are selected once at runtime and
// must agree with the reference within floating-point reassociation error
// (see tests/test_kernels.cpp).

namespace stvedit::kernels {

enum class Backend { scalar, avx2, neon };

// Backend chosen for this process (env STVEDIT_KERNELS=scalar|avx2|neon
// overrides autodetection).
Backend active_backend();
const char* backend_name(Backend b);
bool backend_supported(Backend b);

// Force a backend, e.g. to cross-check SIMD vs scalar. Throws
// std::invalid_argument if the CPU does not support it.
void force_backend(Backend b);

// out[i] = a*x[i] + b*y[i]
void axpby(float a, const float* x, float b, const float* y, float* out, size_t n);
// y[i] += a*x[i]
void axpy(float a, const float* x, float* y, size_t n);
// out[i] = a*x[i] + b
void affine(float a, float b, const float* x, float* out, size_t n);
float dot(const float* x, const float* y, size_t n);
float sum(const float* x, size_t n);
float sumsq(const float* x, size_t n);
// x * sigmoid(x)
void silu(const float* x, float* out, size_t n);
// in-place, numerically stable (max subtraction); rows sum to 1
void softmax_row(float* row, size_t n);
// C[m,n] = A[m,k] * B[n,k]^T  (all rows contiguous)
void gemm_nt(const float* A, const float* B, float* C, size_t m, size_t n, size_t k);
// C[m,n] = A[m,k] * B[k,n]
void gemm_nn(const float* A, const float* B, float* C, size_t m, size_t n, size_t k);

// Scalar reference kernels. Dispatch-independent; used as the equivalence
// oracle and as the fallback backend.
namespace ref {
void axpby(float a, const float* x, float b, const float* y, float* out, size_t n);
void axpy(float a, const float* x, float* y, size_t n);
void affine(float a, float b, const float* x, float* out, size_t n);
float dot(const float* x, const float* y, size_t n);
float sum(const float* x, size_t n);
float sumsq(const float* x, size_t n);
void silu(const float* x, float* out, size_t n);
void softmax_row(float* row, size_t n);
void gemm_nt(const float* A, const float* B, float* C, size_t m, size_t n, size_t k);
void gemm_nn(const float* A, const float* B, float* C, size_t m, size_t n, size_t k);
} // namespace ref

} // namespace stvedit::kernels
