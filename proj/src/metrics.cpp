#include "stvedit/metrics.hpp"

#include "stvedit/kernels.hpp"
#include "stvedit/parallel.hpp"
#include "stvedit/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace stvedit {

size_t ConsistencyMask::kept_count() const {
    size_t n = 0;
    for (uint8_t k : keep)
        n += k != 0;
    return n;
}

namespace {

// channel average in byte range: the classical smoothness weight alpha=10
// is calibrated against 0..255 intensities
std::vector<float> to_gray(const Slice2D& f) {
    std::vector<float> g(static_cast<size_t>(f.rows) * f.cols);
    const float inv = 1.0f / static_cast<float>(f.channels);
    for (int y = 0; y < f.rows; ++y)
        for (int x = 0; x < f.cols; ++x) {
            float s = 0.0f;
            for (int c = 0; c < f.channels; ++c)
                s += f.at(y, x, c);
            g[static_cast<size_t>(y) * f.cols + x] = (s * inv + 1.0f) * 127.5f;
        }
    return g;
}

struct Derivs {
    std::vector<float> ix, iy, it;
};

// central spatial differences on the frame average, forward temporal
Derivs derivatives(const std::vector<float>& a, const std::vector<float>& b, int h, int w) {
    Derivs d;
    d.ix.assign(a.size(), 0.0f);
    d.iy.assign(a.size(), 0.0f);
    d.it.assign(a.size(), 0.0f);
    auto idx = [w](int y, int x) { return static_cast<size_t>(y) * w + x; };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int xm = x > 0 ? x - 1 : 0, xp = x < w - 1 ? x + 1 : w - 1;
            const int ym = y > 0 ? y - 1 : 0, yp = y < h - 1 ? y + 1 : h - 1;
            const float mx =
                0.5f * (a[idx(y, xp)] + b[idx(y, xp)] - a[idx(y, xm)] - b[idx(y, xm)]) * 0.5f;
            const float my =
                0.5f * (a[idx(yp, x)] + b[idx(yp, x)] - a[idx(ym, x)] - b[idx(ym, x)]) * 0.5f;
            d.ix[idx(y, x)] = mx;
            d.iy[idx(y, x)] = my;
            d.it[idx(y, x)] = b[idx(y, x)] - a[idx(y, x)];
        }
    }
    return d;
}

} // namespace

FlowField optical_flow(const Slice2D& frame_a, const Slice2D& frame_b,
                       const FlowOptions& opt) {
    if (frame_a.rows != frame_b.rows || frame_a.cols != frame_b.cols ||
        frame_a.channels != frame_b.channels)
        throw std::invalid_argument("optical_flow: frame dims differ");
    const int h = frame_a.rows, w = frame_a.cols;
    const std::vector<float> ga = to_gray(frame_a), gb = to_gray(frame_b);

    FlowField f;
    f.height = h;
    f.width = w;
    f.u.assign(ga.size(), 0.0f);
    f.v.assign(ga.size(), 0.0f);
    if (ga == gb)
        return f; // zero data term everywhere; the zero field is the minimizer

    const Derivs d = derivatives(ga, gb, h, w);
    const float a2 = static_cast<float>(opt.alpha * opt.alpha);

    std::vector<float> nu(f.u), nv(f.v);
    auto idx = [w](int y, int x) { return static_cast<size_t>(y) * w + x; };
    for (int it = 0; it < opt.iterations; ++it) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const size_t p = idx(y, x);
                float su = 0.0f, sv = 0.0f;
                int deg = 0;
                if (y > 0) { su += f.u[idx(y - 1, x)]; sv += f.v[idx(y - 1, x)]; ++deg; }
                if (y < h - 1) { su += f.u[idx(y + 1, x)]; sv += f.v[idx(y + 1, x)]; ++deg; }
                if (x > 0) { su += f.u[idx(y, x - 1)]; sv += f.v[idx(y, x - 1)]; ++deg; }
                if (x < w - 1) { su += f.u[idx(y, x + 1)]; sv += f.v[idx(y, x + 1)]; ++deg; }
                const float ubar = su / deg, vbar = sv / deg;
                const float ix = d.ix[p], iy = d.iy[p];
                // pointwise exact solve with lagged neighbors; the block
                // splitting keeps the energy non-increasing
                const float r = (ix * ubar + iy * vbar + d.it[p]) /
                                (a2 * deg + ix * ix + iy * iy);
                nu[p] = ubar - ix * r;
                nv[p] = vbar - iy * r;
            }
        }
        f.u.swap(nu);
        f.v.swap(nv);
    }
    return f;
}

double flow_energy(const Slice2D& frame_a, const Slice2D& frame_b, const FlowField& f,
                   double alpha) {
    const int h = frame_a.rows, w = frame_a.cols;
    const std::vector<float> ga = to_gray(frame_a), gb = to_gray(frame_b);
    const Derivs d = derivatives(ga, gb, h, w);
    auto idx = [w](int y, int x) { return static_cast<size_t>(y) * w + x; };
    double data = 0.0, smooth = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t p = idx(y, x);
            const double r = d.ix[p] * f.u[p] + d.iy[p] * f.v[p] + d.it[p];
            data += r * r;
            if (x + 1 < w) {
                const size_t q = idx(y, x + 1);
                smooth += (f.u[p] - f.u[q]) * static_cast<double>(f.u[p] - f.u[q]) +
                          (f.v[p] - f.v[q]) * static_cast<double>(f.v[p] - f.v[q]);
            }
            if (y + 1 < h) {
                const size_t q = idx(y + 1, x);
                smooth += (f.u[p] - f.u[q]) * static_cast<double>(f.u[p] - f.u[q]) +
                          (f.v[p] - f.v[q]) * static_cast<double>(f.v[p] - f.v[q]);
            }
        }
    return data + alpha * alpha * smooth;
}

ConsistencyMask lr_mask(const FlowField& flow_fwd, const FlowField& flow_bwd) {
    if (flow_fwd.height != flow_bwd.height || flow_fwd.width != flow_bwd.width)
        throw std::invalid_argument("lr_mask: field dims differ");
    const int h = flow_fwd.height, w = flow_fwd.width;
    ConsistencyMask m;
    m.height = h;
    m.width = w;
    m.keep.assign(static_cast<size_t>(h) * w, 0);

    auto bilinear = [&](const std::vector<float>& field, float yq, float xq) {
        const int x0 = static_cast<int>(std::floor(xq));
        const int y0 = static_cast<int>(std::floor(yq));
        const float fx = xq - x0, fy = yq - y0;
        auto at = [&](int y, int x) { return field[static_cast<size_t>(y) * w + x]; };
        return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
               fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
    };

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t p = static_cast<size_t>(y) * w + x;
            const float xq = x + flow_fwd.u[p];
            const float yq = y + flow_fwd.v[p];
            // target must land strictly inside the grid for the 2x2 stencil
            if (xq < 0.0f || yq < 0.0f || xq > static_cast<float>(w - 1) ||
                yq > static_cast<float>(h - 1))
                continue;
            const float xc = std::min(xq, static_cast<float>(w - 1) - 1e-4f);
            const float yc = std::min(yq, static_cast<float>(h - 1) - 1e-4f);
            const float bu = bilinear(flow_bwd.u, yc, xc);
            const float bv = bilinear(flow_bwd.v, yc, xc);
            const float du = flow_fwd.u[p] + bu;
            const float dv = flow_fwd.v[p] + bv;
            if (std::sqrt(du * du + dv * dv) <= 1.0f)
                m.keep[p] = 1;
        }
    return m;
}

double flow_error(const VideoVolume& src_video, const VideoVolume& edit_video,
                  const FlowOptions& opt) {
    if (!src_video.same_geometry(edit_video))
        throw std::invalid_argument("flow_error: video geometries differ");
    if (src_video.n_frames < 2)
        throw std::invalid_argument("flow_error: need at least 2 frames");

    const int pairs = src_video.n_frames - 1;
    std::vector<double> sums(pairs, 0.0);
    std::vector<size_t> counts(pairs, 0);
    parallel_for(pairs, [&](int i) {
        const Slice2D sa = slice(src_video, SliceAxis::XY, i);
        const Slice2D sb = slice(src_video, SliceAxis::XY, i + 1);
        const Slice2D ea = slice(edit_video, SliceAxis::XY, i);
        const Slice2D eb = slice(edit_video, SliceAxis::XY, i + 1);
        const FlowField fs = optical_flow(sa, sb, opt);
        const FlowField fb = optical_flow(sb, sa, opt);
        const FlowField fe = optical_flow(ea, eb, opt);
        const ConsistencyMask mask = lr_mask(fs, fb);
        double s = 0.0;
        size_t n = 0;
        for (size_t p = 0; p < fs.u.size(); ++p) {
            if (!mask.keep[p])
                continue;
            const double du = fs.u[p] - fe.u[p];
            const double dv = fs.v[p] - fe.v[p];
            s += std::sqrt(du * du + dv * dv);
            ++n;
        }
        sums[i] = s;
        counts[i] = n;
    });
    double total = 0.0;
    size_t n = 0;
    for (int i = 0; i < pairs; ++i) {
        total += sums[i];
        n += counts[i];
    }
    return n == 0 ? 0.0 : total / static_cast<double>(n);
}

FrameEmbedder make_projection_embedder(uint64_t seed, int out_dim) {
    return [seed, out_dim](const Slice2D& frame) {
        // 8x8 average-pooled thumbnail per channel
        const int grid = 8;
        std::vector<float> pooled(static_cast<size_t>(grid) * grid * frame.channels, 0.0f);
        std::vector<int> count(pooled.size(), 0);
        for (int y = 0; y < frame.rows; ++y) {
            const int gy = std::min(y * grid / frame.rows, grid - 1);
            for (int x = 0; x < frame.cols; ++x) {
                const int gx = std::min(x * grid / frame.cols, grid - 1);
                for (int c = 0; c < frame.channels; ++c) {
                    const size_t q = (static_cast<size_t>(gy) * grid + gx) * frame.channels + c;
                    pooled[q] += frame.at(y, x, c);
                    count[q] += 1;
                }
            }
        }
        for (size_t q = 0; q < pooled.size(); ++q)
            if (count[q] > 0)
                pooled[q] /= static_cast<float>(count[q]);

        std::vector<float> out(out_dim, 0.0f);
        for (int o = 0; o < out_dim; ++o) {
            Rng rng(mix_seed(seed, 0xE3BDull + o));
            double s = 0.0;
            for (float pv : pooled)
                s += pv * rng.normal();
            out[o] = static_cast<float>(s);
        }
        const float norm = std::sqrt(kernels::sumsq(out.data(), out.size()));
        if (norm > 0.0f) {
            for (auto& v : out)
                v /= norm;
        } else {
            out[0] = 1.0f; // canonical unit vector for all-zero frames
        }
        return out;
    };
}

double embed_consistency(const VideoVolume& video, const FrameEmbedder& embedder) {
    if (video.n_frames < 1)
        throw std::invalid_argument("embed_consistency: empty video");
    if (video.n_frames == 1)
        return 1.0;
    std::vector<std::vector<float>> emb(video.n_frames);
    parallel_for(video.n_frames,
                 [&](int t) { emb[t] = embedder(slice(video, SliceAxis::XY, t)); });
    double s = 0.0;
    for (int t = 0; t + 1 < video.n_frames; ++t) {
        if (emb[t].size() != emb[t + 1].size())
            throw std::invalid_argument("embed_consistency: embedder output dims differ");
        s += kernels::dot(emb[t].data(), emb[t + 1].data(), emb[t].size());
    }
    return s / static_cast<double>(video.n_frames - 1);
}

} // namespace stvedit
