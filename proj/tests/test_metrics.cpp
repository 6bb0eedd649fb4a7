#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracle.hpp"
#include "stvedit/metrics.hpp"
#include "stvedit/rng.hpp"

#include <cmath>

using namespace stvedit;

namespace {

// smooth bright blob on a dark background, centered at (cx, cy)
Slice2D blob_frame(int h, int w, double cx, double cy, double sigma) {
    Slice2D f(h, w, 1, SliceAxis::XY, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            f.at(y, x, 0) = static_cast<float>(
                2.0 * std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) /
                               (2 * sigma * sigma)) -
                1.0);
    return f;
}

VideoVolume blob_video(int frames, int h, int w, double cx0, double dx, double sigma) {
    VideoVolume v(frames, h, w, 1, Space::pixel);
    for (int t = 0; t < frames; ++t) {
        Slice2D f = blob_frame(h, w, cx0 + t * dx, h / 2.0, sigma);
        std::copy(f.data.begin(), f.data.end(), v.frame(t));
    }
    return v;
}

FlowField uniform_flow(int h, int w, float u, float v) {
    FlowField f;
    f.height = h;
    f.width = w;
    f.u.assign(static_cast<size_t>(h) * w, u);
    f.v.assign(static_cast<size_t>(h) * w, v);
    return f;
}

} // namespace

TEST_CASE("optical_flow: identical frames give the exact zero field") {
    Slice2D a = blob_frame(24, 24, 12, 12, 4);
    FlowField f = optical_flow(a, a);
    for (size_t i = 0; i < f.u.size(); ++i) {
        CHECK(f.u[i] == 0.0f);
        CHECK(f.v[i] == 0.0f);
    }
}

TEST_CASE("optical_flow: constant frames stay at the zero field") {
    Slice2D a(16, 16, 1), b(16, 16, 1);
    std::fill(a.data.begin(), a.data.end(), 0.25f);
    std::fill(b.data.begin(), b.data.end(), -0.5f);
    FlowField f = optical_flow(a, b);
    for (size_t i = 0; i < f.u.size(); ++i) {
        CHECK(f.u[i] == doctest::Approx(0.0f).epsilon(1e-6));
        CHECK(f.v[i] == doctest::Approx(0.0f).epsilon(1e-6));
    }
}

TEST_CASE("optical_flow: 2 px translation recovered on the blob") {
    Slice2D a = blob_frame(48, 48, 20, 24, 5);
    Slice2D b = blob_frame(48, 48, 22, 24, 5);
    FlowField f = optical_flow(a, b); // defaults: alpha 10, 200 sweeps
    double err = 0.0, mv = 0.0;
    int n = 0;
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x)
            if (a.at(y, x, 0) > 0.0f) {
                const double du = f.uat(y, x) - 2.0;
                const double dv = f.vat(y, x);
                err += std::sqrt(du * du + dv * dv);
                mv += f.vat(y, x);
                ++n;
            }
    REQUIRE(n > 50);
    CHECK(err / n < 0.5);
    CHECK(std::abs(mv / n) < 0.1);
}

TEST_CASE("optical_flow: dimension mismatch throws") {
    Slice2D a(8, 8, 1), b(8, 9, 1);
    CHECK_THROWS_AS(optical_flow(a, b), std::invalid_argument);
}

TEST_CASE("optical_flow: energy is non-increasing over sweeps") {
    Slice2D a = blob_frame(32, 32, 14, 16, 4);
    Slice2D b = blob_frame(32, 32, 16, 16, 4);
    const double alpha = 10.0;
    double prev = flow_energy(a, b, uniform_flow(32, 32, 0, 0), alpha);
    for (int iters : {1, 2, 5, 10, 20, 50, 100}) {
        FlowOptions opt;
        opt.alpha = alpha;
        opt.iterations = iters;
        const double e = flow_energy(a, b, optical_flow(a, b, opt), alpha);
        CHECK(e <= prev * (1.0 + 1e-9) + 1e-9);
        prev = e;
    }
}

TEST_CASE("lr_mask: zero flows keep every pixel") {
    ConsistencyMask m = lr_mask(uniform_flow(10, 12, 0, 0), uniform_flow(10, 12, 0, 0));
    CHECK(m.kept_count() == 120);
}

TEST_CASE("lr_mask: 3 px forward with zero backward excludes everything") {
    ConsistencyMask m = lr_mask(uniform_flow(10, 12, 3, 0), uniform_flow(10, 12, 0, 0));
    CHECK(m.kept_count() == 0); // disparity 3 > 1 everywhere that lands in range
}

TEST_CASE("lr_mask: small symmetric flows keep every pixel they can check") {
    ConsistencyMask m = lr_mask(uniform_flow(10, 12, 0.4f, 0), uniform_flow(10, 12, -0.4f, 0));
    // pixels whose forward target stays on the grid are kept
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 12; ++x) {
            const bool in_range = x + 0.4f <= 11.0f;
            CHECK(m.at(y, x) == in_range);
        }
}

TEST_CASE("lr_mask: out-of-bounds forward targets are excluded") {
    ConsistencyMask m = lr_mask(uniform_flow(8, 8, 100, 0), uniform_flow(8, 8, -100, 0));
    CHECK(m.kept_count() == 0);
}

TEST_CASE("flow_error: identical videos give exactly zero") {
    VideoVolume v = blob_video(4, 32, 32, 10, 2, 4);
    CHECK(flow_error(v, v) == 0.0);
}

TEST_CASE("flow_error: photometric inversion preserves motion") {
    VideoVolume v = blob_video(3, 40, 40, 12, 2, 5);
    VideoVolume inv = v;
    for (auto& x : inv.data)
        x = -x;
    CHECK(flow_error(v, inv) < 0.3);
}

TEST_CASE("flow_error: frozen edit scores about the source flow magnitude") {
    VideoVolume v = blob_video(3, 40, 40, 12, 2, 5);
    VideoVolume frozen = v;
    for (int t = 1; t < 3; ++t)
        std::copy(v.frame(0), v.frame(0) + v.frame_size(), frozen.frame(t));

    const double err = flow_error(v, frozen);

    // expected: mean source flow magnitude over the same masked pixels
    double expect = 0.0;
    size_t n = 0;
    for (int t = 0; t < 2; ++t) {
        Slice2D a = slice(v, SliceAxis::XY, t), b = slice(v, SliceAxis::XY, t + 1);
        FlowField fwd = optical_flow(a, b);
        FlowField bwd = optical_flow(b, a);
        ConsistencyMask m = lr_mask(fwd, bwd);
        for (size_t p = 0; p < fwd.u.size(); ++p)
            if (m.keep[p]) {
                expect += std::sqrt(fwd.u[p] * fwd.u[p] + fwd.v[p] * fwd.v[p]);
                ++n;
            }
    }
    REQUIRE(n > 0);
    expect /= static_cast<double>(n);
    CHECK(err == doctest::Approx(expect).epsilon(0.05));
}

TEST_CASE("flow_error: geometry mismatch throws") {
    VideoVolume a = blob_video(3, 16, 16, 6, 1, 3);
    VideoVolume b = blob_video(3, 16, 18, 6, 1, 3);
    CHECK_THROWS_AS(flow_error(a, b), std::invalid_argument);
}

TEST_CASE("embed_consistency: constant video scores 1") {
    VideoVolume v(5, 16, 16, 3, Space::pixel);
    std::fill(v.data.begin(), v.data.end(), 0.25f);
    CHECK(embed_consistency(v, make_projection_embedder(3)) == doctest::Approx(1.0));
}

TEST_CASE("embed_consistency: orthogonal-by-construction embeddings score 0") {
    VideoVolume v(4, 4, 4, 1, Space::pixel);
    oracle::fill_normal(v.data, 5, 0.2f);
    FrameEmbedder onehot = [](const Slice2D& f) {
        std::vector<float> e(8, 0.0f);
        e[f.index % 8] = 1.0f; // consecutive frames hit different axes
        return e;
    };
    CHECK(embed_consistency(v, onehot) == doctest::Approx(0.0));
}

TEST_CASE("embed_consistency: always within [-1, 1], deterministic") {
    VideoVolume v(6, 20, 20, 3, Space::pixel);
    oracle::fill_normal(v.data, 6, 0.3f);
    for (auto& x : v.data)
        x = std::clamp(x, -1.0f, 1.0f);
    const double c1 = embed_consistency(v, make_projection_embedder(9));
    const double c2 = embed_consistency(v, make_projection_embedder(9));
    CHECK(c1 == c2);
    CHECK(c1 >= -1.0);
    CHECK(c1 <= 1.0);
}
