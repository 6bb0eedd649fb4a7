#pragma once

// Test-only reference implementations, kept independent of the library's
// computation paths: plain double-precision loops, Gauss-Jordan inversion
// instead of Cholesky solves, direct formula evaluation.

#include "stvedit/mat.hpp"
#include "stvedit/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace oracle {

// Gauss-Jordan inverse of a dense matrix (no pivot-free assumptions beyond
// test-sized SPD inputs).
inline std::vector<double> invert_dense(std::vector<double> a, int n) {
    std::vector<double> inv(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        inv[static_cast<size_t>(i) * n + i] = 1.0;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[static_cast<size_t>(r) * n + col]) >
                std::abs(a[static_cast<size_t>(piv) * n + col]))
                piv = r;
        if (piv != col)
            for (int c = 0; c < n; ++c) {
                std::swap(a[static_cast<size_t>(piv) * n + c],
                          a[static_cast<size_t>(col) * n + c]);
                std::swap(inv[static_cast<size_t>(piv) * n + c],
                          inv[static_cast<size_t>(col) * n + c]);
            }
        const double d = a[static_cast<size_t>(col) * n + col];
        if (d == 0.0)
            throw std::runtime_error("oracle: singular matrix");
        for (int c = 0; c < n; ++c) {
            a[static_cast<size_t>(col) * n + c] /= d;
            inv[static_cast<size_t>(col) * n + c] /= d;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col)
                continue;
            const double f = a[static_cast<size_t>(r) * n + col];
            if (f == 0.0)
                continue;
            for (int c = 0; c < n; ++c) {
                a[static_cast<size_t>(r) * n + c] -= f * a[static_cast<size_t>(col) * n + c];
                inv[static_cast<size_t>(r) * n + c] -= f * inv[static_cast<size_t>(col) * n + c];
            }
        }
    }
    return inv;
}

// Expected per-coordinate MSE of the linear estimator
// eps_hat = sqrt(1-a) (a*S + (1-a)I)^-1 x on data with true x0-covariance Ct:
// (dim - 2(1-a) tr(A) + (1-a) tr(A^T A C_true)) / dim, C_true = a*Ct + (1-a)I.
inline double linear_estimator_mse(const std::vector<double>& s_assumed,
                                   const std::vector<double>& ct_true, int n, double a) {
    std::vector<double> m(s_assumed.size());
    for (size_t i = 0; i < m.size(); ++i)
        m[i] = a * s_assumed[i];
    for (int i = 0; i < n; ++i)
        m[static_cast<size_t>(i) * n + i] += 1.0 - a;
    const std::vector<double> A = invert_dense(m, n);

    double tr_a = 0.0;
    for (int i = 0; i < n; ++i)
        tr_a += A[static_cast<size_t>(i) * n + i];

    // tr(A^T A C_true) with C_true = a*Ct + (1-a)I
    double tr_aac = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            // (A^T A)[i][j] = sum_k A[k][i] A[k][j]
            double ata = 0.0;
            for (int k = 0; k < n; ++k)
                ata += A[static_cast<size_t>(k) * n + i] * A[static_cast<size_t>(k) * n + j];
            double ctrue = a * ct_true[static_cast<size_t>(j) * n + i];
            if (i == j)
                ctrue += 1.0 - a;
            tr_aac += ata * ctrue;
        }
    return (n - 2.0 * (1.0 - a) * tr_a + (1.0 - a) * tr_aac) / n;
}

// matched case: the estimator's own prior is the data prior
inline double matched_mse(const std::vector<double>& s, int n, double a) {
    return linear_estimator_mse(s, s, n, a);
}

// straightforward double-precision attention, row softmax without tricks
inline stvedit::Mat plain_attention(const stvedit::Mat& q, const stvedit::Mat& k,
                                    const stvedit::Mat& v) {
    stvedit::Mat out(q.rows, v.cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols));
    for (int i = 0; i < q.rows; ++i) {
        std::vector<double> w(k.rows);
        double mx = -1e300;
        for (int j = 0; j < k.rows; ++j) {
            double s = 0.0;
            for (int d = 0; d < q.cols; ++d)
                s += static_cast<double>(q.at(i, d)) * k.at(j, d);
            w[j] = s * scale;
            mx = std::max(mx, w[j]);
        }
        double z = 0.0;
        for (double& x : w) {
            x = std::exp(x - mx);
            z += x;
        }
        for (int c = 0; c < v.cols; ++c) {
            double s = 0.0;
            for (int j = 0; j < k.rows; ++j)
                s += w[j] / z * v.at(j, c);
            out.at(i, c) = static_cast<float>(s);
        }
    }
    return out;
}

inline void fill_normal(std::vector<float>& v, uint64_t seed, float scale = 1.0f) {
    stvedit::Rng rng(seed);
    for (auto& x : v)
        x = scale * rng.normal_f();
}

inline float max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
    float m = 0.0f;
    for (size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace oracle
