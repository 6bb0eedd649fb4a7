#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stvedit/kernels.hpp"
#include "stvedit/rng.hpp"

#include <cmath>
#include <vector>

using namespace stvedit;
namespace k = stvedit::kernels;

namespace {

std::vector<float> randn(size_t n, uint64_t seed) {
    std::vector<float> v(n);
    Rng rng(seed);
    for (auto& x : v)
        x = rng.normal_f();
    return v;
}

// relative tolerance for reductions: SIMD reassociation changes rounding
void check_close(float a, float b, float tol) {
    CHECK(std::abs(a - b) <= tol * (1.0f + std::max(std::abs(a), std::abs(b))));
}

} // namespace

TEST_CASE("active backend is supported and nameable") {
    k::Backend b = k::active_backend();
    CHECK(k::backend_supported(b));
    CHECK(k::backend_name(b) != nullptr);
    CHECK(k::backend_supported(k::Backend::scalar));
}

TEST_CASE("dispatched kernels agree with the scalar reference") {
    // odd sizes stress the vector tails
    for (size_t n : {1u, 7u, 8u, 9u, 63u, 64u, 257u, 1000u}) {
        std::vector<float> x = randn(n, 10 + n), y = randn(n, 20 + n);
        std::vector<float> a(n), b(n);

        k::axpby(1.7f, x.data(), -0.3f, y.data(), a.data(), n);
        k::ref::axpby(1.7f, x.data(), -0.3f, y.data(), b.data(), n);
        for (size_t i = 0; i < n; ++i)
            CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-6));

        a = y;
        b = y;
        k::axpy(0.9f, x.data(), a.data(), n);
        k::ref::axpy(0.9f, x.data(), b.data(), n);
        for (size_t i = 0; i < n; ++i)
            CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-6));

        k::affine(2.0f, 0.25f, x.data(), a.data(), n);
        k::ref::affine(2.0f, 0.25f, x.data(), b.data(), n);
        for (size_t i = 0; i < n; ++i)
            CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-6));

        check_close(k::dot(x.data(), y.data(), n), k::ref::dot(x.data(), y.data(), n), 1e-5f);
        check_close(k::sum(x.data(), n), k::ref::sum(x.data(), n), 1e-5f);
        check_close(k::sumsq(x.data(), n), k::ref::sumsq(x.data(), n), 1e-5f);

        k::silu(x.data(), a.data(), n);
        k::ref::silu(x.data(), b.data(), n);
        for (size_t i = 0; i < n; ++i)
            CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-6));
    }
}

TEST_CASE("softmax rows sum to 1 and match reference") {
    for (size_t n : {1u, 2u, 33u, 400u}) {
        std::vector<float> r = randn(n, 99 + n);
        for (auto& v : r)
            v *= 10.0f; // exercise the max-subtraction
        std::vector<float> r2 = r;
        k::softmax_row(r.data(), n);
        k::ref::softmax_row(r2.data(), n);
        float s = 0.0f;
        for (size_t i = 0; i < n; ++i) {
            CHECK(r[i] == doctest::Approx(r2[i]).epsilon(1e-5));
            CHECK(r[i] >= 0.0f);
            s += r[i];
        }
        CHECK(s == doctest::Approx(1.0f).epsilon(1e-5));
    }
}

TEST_CASE("gemm variants match the reference on ragged shapes") {
    for (auto [m, n, kk] : {std::tuple{1, 1, 1}, {3, 5, 7}, {8, 8, 8}, {13, 9, 33},
                            {32, 17, 96}}) {
        std::vector<float> A = randn(static_cast<size_t>(m) * kk, 7);
        std::vector<float> B = randn(static_cast<size_t>(n) * kk, 8);
        std::vector<float> C1(static_cast<size_t>(m) * n), C2(C1.size());
        k::gemm_nt(A.data(), B.data(), C1.data(), m, n, kk);
        k::ref::gemm_nt(A.data(), B.data(), C2.data(), m, n, kk);
        for (size_t i = 0; i < C1.size(); ++i)
            check_close(C1[i], C2[i], 1e-5f);

        std::vector<float> B2 = randn(static_cast<size_t>(kk) * n, 9);
        k::gemm_nn(A.data(), B2.data(), C1.data(), m, n, kk);
        k::ref::gemm_nn(A.data(), B2.data(), C2.data(), m, n, kk);
        for (size_t i = 0; i < C1.size(); ++i)
            check_close(C1[i], C2[i], 1e-5f);
    }
}

TEST_CASE("forcing an unsupported backend throws, scalar always works") {
    const k::Backend original = k::active_backend();
    k::force_backend(k::Backend::scalar);
    CHECK(k::active_backend() == k::Backend::scalar);
#if !defined(__aarch64__)
    CHECK_THROWS_AS(k::force_backend(k::Backend::neon), std::invalid_argument);
#endif
    k::force_backend(original);
    CHECK(k::active_backend() == original);
}
