#include "unet_internal.hpp"

#include "stvedit/kernels.hpp"
#include "stvedit/parallel.hpp"
#include "stvedit/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace stvedit {

namespace {

// internal feature map, channel-last (y, x, c); rows of the implied
// (h*w, c) matrix are attention tokens
struct FMap {
    int h = 0, w = 0, c = 0;
    std::vector<float> v;

    FMap() = default;
    FMap(int h_, int w_, int c_) : h(h_), w(w_), c(c_), v(static_cast<size_t>(h_) * w_ * c_) {}
    float* px(int y, int x) { return v.data() + (static_cast<size_t>(y) * w + x) * c; }
    const float* px(int y, int x) const {
        return v.data() + (static_cast<size_t>(y) * w + x) * c;
    }
    size_t size() const { return v.size(); }
};

Mat tokens_of(const FMap& f) {
    Mat m(f.h * f.w, f.c);
    m.v = f.v;
    return m;
}

/*------------------------------ primitive layers ------------------------------*/

FMap conv2d(const FMap& in, const Conv2D& conv) {
    const int k = conv.k, stride = conv.stride;
    const int pad = k / 2;
    const int oh = (in.h + 2 * pad - k) / stride + 1;
    const int ow = (in.w + 2 * pad - k) / stride + 1;
    const int patch = k * k * in.c;

    // im2col into a per-thread scratch, then one C = cols * W^T
    static thread_local std::vector<float> cols;
    cols.resize(static_cast<size_t>(oh) * ow * patch);
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            float* dst = cols.data() + (static_cast<size_t>(oy) * ow + ox) * patch;
            for (int dy = 0; dy < k; ++dy) {
                const int sy = oy * stride + dy - pad;
                if (sy < 0 || sy >= in.h) {
                    std::fill(dst + dy * k * in.c, dst + (dy + 1) * k * in.c, 0.0f);
                    continue;
                }
                const int x0 = ox * stride - pad;
                if (x0 >= 0 && x0 + k <= in.w) {
                    // contiguous interior span
                    const float* src = in.px(sy, x0);
                    std::copy(src, src + static_cast<size_t>(k) * in.c,
                              dst + dy * k * in.c);
                    continue;
                }
                for (int dx = 0; dx < k; ++dx) {
                    const int sx = x0 + dx;
                    float* cell = dst + (dy * k + dx) * in.c;
                    if (sx < 0 || sx >= in.w) {
                        std::fill(cell, cell + in.c, 0.0f);
                    } else {
                        const float* src = in.px(sy, sx);
                        std::copy(src, src + in.c, cell);
                    }
                }
            }
        }
    }
    FMap out(oh, ow, conv.c_out);
    kernels::gemm_nt(cols.data(), conv.w.v.data(), out.v.data(), oh * ow, conv.c_out, patch);
    for (int p = 0; p < oh * ow; ++p) {
        float* row = out.v.data() + static_cast<size_t>(p) * conv.c_out;
        for (int ch = 0; ch < conv.c_out; ++ch)
            row[ch] += conv.b[ch];
    }
    return out;
}

FMap conv1x1(const FMap& in, const Conv2D& conv) {
    FMap out(in.h, in.w, conv.c_out);
    kernels::gemm_nt(in.v.data(), conv.w.v.data(), out.v.data(), in.h * in.w, conv.c_out, in.c);
    for (int p = 0; p < in.h * in.w; ++p) {
        float* row = out.v.data() + static_cast<size_t>(p) * conv.c_out;
        for (int ch = 0; ch < conv.c_out; ++ch)
            row[ch] += conv.b[ch];
    }
    return out;
}

void group_norm(const FMap& in, const GroupNorm& gn, FMap& out) {
    const int cg = in.c / gn.groups;
    const double inv_n = 1.0 / (static_cast<double>(in.h) * in.w * cg);
    for (int g = 0; g < gn.groups; ++g) {
        double mean = 0.0, sq = 0.0;
        for (int p = 0; p < in.h * in.w; ++p) {
            const float* row = in.v.data() + static_cast<size_t>(p) * in.c + g * cg;
            for (int ch = 0; ch < cg; ++ch) {
                mean += row[ch];
                sq += static_cast<double>(row[ch]) * row[ch];
            }
        }
        mean *= inv_n;
        const double var = sq * inv_n - mean * mean;
        const float inv_std = static_cast<float>(1.0 / std::sqrt(var + 1e-5));
        const float fmean = static_cast<float>(mean);
        for (int p = 0; p < in.h * in.w; ++p) {
            const float* src = in.v.data() + static_cast<size_t>(p) * in.c + g * cg;
            float* dst = out.v.data() + static_cast<size_t>(p) * in.c + g * cg;
            for (int ch = 0; ch < cg; ++ch)
                dst[ch] = (src[ch] - fmean) * inv_std * gn.gamma[g * cg + ch] +
                          gn.beta[g * cg + ch];
        }
    }
}

FMap group_norm(const FMap& in, const GroupNorm& gn) {
    FMap out(in.h, in.w, in.c);
    group_norm(in, gn, out);
    return out;
}

void silu_inplace(FMap& f) { kernels::silu(f.v.data(), f.v.data(), f.size()); }

FMap upsample2x(const FMap& in) {
    FMap out(in.h * 2, in.w * 2, in.c);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) {
            const float* src = in.px(y / 2, x / 2);
            std::copy(src, src + in.c, out.px(y, x));
        }
    return out;
}

FMap concat_channels(const FMap& a, const FMap& b) {
    FMap out(a.h, a.w, a.c + b.c);
    for (int p = 0; p < a.h * a.w; ++p) {
        const float* pa = a.v.data() + static_cast<size_t>(p) * a.c;
        const float* pb = b.v.data() + static_cast<size_t>(p) * b.c;
        float* po = out.v.data() + static_cast<size_t>(p) * out.c;
        std::copy(pa, pa + a.c, po);
        std::copy(pb, pb + b.c, po + a.c);
    }
    return out;
}

std::vector<float> timestep_embedding(int tau) {
    const int half = UNet::kTembDim / 2;
    std::vector<float> emb(UNet::kTembDim);
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / (half - 1));
        emb[i] = static_cast<float>(std::sin(tau * freq));
        emb[half + i] = static_cast<float>(std::cos(tau * freq));
    }
    return emb;
}

FMap res_block(const FMap& x, const ResBlock& rb, const std::vector<float>& temb) {
    FMap h = group_norm(x, rb.gn1);
    silu_inplace(h);
    h = conv2d(h, rb.conv1);

    // per-channel shift from the timestep embedding
    std::vector<float> shift(rb.conv1.c_out);
    for (int o = 0; o < rb.conv1.c_out; ++o)
        shift[o] = kernels::dot(rb.temb.w.row(o), temb.data(), temb.size()) + rb.temb.b[o];
    for (int p = 0; p < h.h * h.w; ++p) {
        float* row = h.v.data() + static_cast<size_t>(p) * h.c;
        for (int ch = 0; ch < h.c; ++ch)
            row[ch] += shift[ch];
    }

    FMap h2 = group_norm(h, rb.gn2);
    silu_inplace(h2);
    h2 = conv2d(h2, rb.conv2);

    if (rb.has_skip) {
        FMap sk = conv1x1(x, rb.skip);
        kernels::axpy(1.0f, sk.v.data(), h2.v.data(), h2.size());
    } else {
        kernels::axpy(1.0f, x.v.data(), h2.v.data(), h2.size());
    }
    return h2;
}

} // namespace

/*------------------------------ construction ------------------------------*/

namespace {

struct Init {
    Rng rng;
    explicit Init(uint64_t seed) : rng(mix_seed(seed, 0xD5EEDull)) {}

    void fill(std::vector<float>& v, size_t n, float mean = 0.0f) {
        v.resize(n);
        for (size_t i = 0; i < n; ++i)
            v[i] = mean + 0.02f * rng.normal_f();
    }
    void fill(Mat& m, int rows, int cols) {
        m = Mat(rows, cols);
        for (auto& x : m.v)
            x = 0.02f * rng.normal_f();
    }
    Conv2D conv(int c_in, int c_out, int k, int stride) {
        Conv2D c;
        c.c_in = c_in;
        c.c_out = c_out;
        c.k = k;
        c.stride = stride;
        fill(c.w, c_out, c_in * k * k);
        fill(c.b, c_out);
        return c;
    }
    GroupNorm gn(int c) {
        GroupNorm g;
        fill(g.gamma, c, 1.0f);
        fill(g.beta, c);
        return g;
    }
    Linear linear(int out, int in) {
        Linear l;
        fill(l.w, out, in);
        fill(l.b, out);
        return l;
    }
    ResBlock res(int c_in, int c_out) {
        ResBlock r;
        r.gn1 = gn(c_in);
        r.conv1 = conv(c_in, c_out, 3, 1);
        r.temb = linear(c_out, UNet::kTembDim);
        r.gn2 = gn(c_out);
        r.conv2 = conv(c_out, c_out, 3, 1);
        if (c_in != c_out) {
            r.skip = conv(c_in, c_out, 1, 1);
            r.has_skip = true;
        }
        return r;
    }
    AttnBlock attn(int layer_id, int c) {
        AttnBlock a;
        a.layer_id = layer_id;
        a.gn_self = gn(c);
        fill(a.self_w.w_q, c, c);
        fill(a.self_w.w_k, c, c);
        fill(a.self_w.w_v, c, c);
        fill(a.w_o, c, c);
        a.gn_cross = gn(c);
        fill(a.w_qc, c, c);
        fill(a.w_kc, c, kPromptDim);
        fill(a.w_vc, c, kPromptDim);
        fill(a.w_oc, c, c);
        return a;
    }
};

} // namespace

UNet::UNet(const UNetGeometry& g, uint64_t seed) : geo(g) {
    const int b = g.base_width; // channel width at every level
    const int b2 = b;
    Init init(seed);
    conv_in = init.conv(g.channels, b, 3, 1);
    res_d0 = init.res(b, b);
    down0 = init.conv(b, b, 3, 2);
    res_d1 = init.res(b, b2);
    down1 = init.conv(b2, b2, 3, 2);
    res_m1 = init.res(b2, b2);
    attn_mid = init.attn(kAttnMid, b2);
    res_m2 = init.res(b2, b2);
    res_u1 = init.res(b2 + b2, b2);
    attn_up1 = init.attn(kAttnUp1, b2);
    upconv1 = init.conv(b2, b2, 3, 1);
    res_u0 = init.res(b2 + b2, b);
    attn_up0 = init.attn(kAttnUp0, b);
    upconv0 = init.conv(b, b, 3, 1);
    res_out = init.res(b + b, b);
    gn_out = init.gn(b);
    conv_out = init.conv(b, g.channels, 3, 1);
}

/*------------------------------ serialization ------------------------------*/

namespace {

// Uniform walk over all parameters, used by both save and load so the
// name set stays consistent.
template <typename F>
void walk_conv(const std::string& p, Conv2D& c, F&& f) {
    f(p + ".w", c.w.v, std::vector<uint32_t>{static_cast<uint32_t>(c.w.rows),
                                             static_cast<uint32_t>(c.w.cols)});
    f(p + ".b", c.b, std::vector<uint32_t>{static_cast<uint32_t>(c.b.size())});
}
template <typename F>
void walk_gn(const std::string& p, GroupNorm& g, F&& f) {
    f(p + ".gamma", g.gamma, std::vector<uint32_t>{static_cast<uint32_t>(g.gamma.size())});
    f(p + ".beta", g.beta, std::vector<uint32_t>{static_cast<uint32_t>(g.beta.size())});
}
template <typename F>
void walk_mat(const std::string& name, Mat& m, F&& f) {
    f(name, m.v, std::vector<uint32_t>{static_cast<uint32_t>(m.rows),
                                       static_cast<uint32_t>(m.cols)});
}
template <typename F>
void walk_res(const std::string& p, ResBlock& r, F&& f) {
    walk_gn(p + ".gn1", r.gn1, f);
    walk_conv(p + ".conv1", r.conv1, f);
    walk_mat(p + ".temb.w", r.temb.w, f);
    f(p + ".temb.b", r.temb.b, std::vector<uint32_t>{static_cast<uint32_t>(r.temb.b.size())});
    walk_gn(p + ".gn2", r.gn2, f);
    walk_conv(p + ".conv2", r.conv2, f);
    if (r.has_skip)
        walk_conv(p + ".skip", r.skip, f);
}
template <typename F>
void walk_attn(const std::string& p, AttnBlock& a, F&& f) {
    walk_gn(p + ".gn_self", a.gn_self, f);
    walk_mat(p + ".w_q", a.self_w.w_q, f);
    walk_mat(p + ".w_k", a.self_w.w_k, f);
    walk_mat(p + ".w_v", a.self_w.w_v, f);
    walk_mat(p + ".w_o", a.w_o, f);
    walk_gn(p + ".gn_cross", a.gn_cross, f);
    walk_mat(p + ".w_qc", a.w_qc, f);
    walk_mat(p + ".w_kc", a.w_kc, f);
    walk_mat(p + ".w_vc", a.w_vc, f);
    walk_mat(p + ".w_oc", a.w_oc, f);
}

template <typename F>
void walk_unet(UNet& u, F&& f) {
    walk_conv("conv_in", u.conv_in, f);
    walk_res("res_d0", u.res_d0, f);
    walk_conv("down0", u.down0, f);
    walk_res("res_d1", u.res_d1, f);
    walk_conv("down1", u.down1, f);
    walk_res("res_m1", u.res_m1, f);
    walk_attn("attn_mid", u.attn_mid, f);
    walk_res("res_m2", u.res_m2, f);
    walk_res("res_u1", u.res_u1, f);
    walk_attn("attn_up1", u.attn_up1, f);
    walk_conv("upconv1", u.upconv1, f);
    walk_res("res_u0", u.res_u0, f);
    walk_attn("attn_up0", u.attn_up0, f);
    walk_conv("upconv0", u.upconv0, f);
    walk_res("res_out", u.res_out, f);
    walk_gn("gn_out", u.gn_out, f);
    walk_conv("conv_out", u.conv_out, f);
}

} // namespace

TensorFile UNet::to_tensor_file() const {
    TensorFile tf;
    tf.add("geometry",
           {2},
           {static_cast<float>(geo.channels), static_cast<float>(geo.base_width)});
    walk_unet(const_cast<UNet&>(*this),
              [&tf](const std::string& name, std::vector<float>& data,
                    std::vector<uint32_t> dims) { tf.add(name, std::move(dims), data); });
    return tf;
}

UNet::UNet(const TensorFile& tf) {
    const NamedTensor* g = tf.find("geometry");
    if (!g || g->data.size() != 2)
        throw std::runtime_error("UNet: missing geometry tensor in weights file");
    geo.channels = static_cast<int>(g->data[0]);
    geo.base_width = static_cast<int>(g->data[1]);
    // build with the right shapes, then overwrite from the file
    *this = UNet(geo, 0);
    walk_unet(*this, [&tf](const std::string& name, std::vector<float>& data,
                           std::vector<uint32_t> dims) {
        const NamedTensor* t = tf.find(name);
        if (!t)
            throw std::runtime_error("UNet: weights file is missing tensor " + name);
        if (t->dims != dims || t->data.size() != data.size())
            throw std::runtime_error("UNet: tensor shape mismatch for " + name);
        data = t->data;
    });
}

/*------------------------------ forward ------------------------------*/

namespace {

// Self/extended attention with optional capture or (Q,K) injection, then
// prompt cross-attention. Residual adds around both.
void attn_block_batch(std::vector<FMap>& xs, const AttnBlock& blk, int tau,
                      const PromptEmbedding& prompt,
                      const std::vector<std::vector<int>>& context,
                      const std::vector<int>& frame_labels,
                      const AttentionControl* control) {
    const int n = static_cast<int>(xs.size());
    std::vector<Mat> tok(n), q(n), k(n), v(n);
    parallel_for(n, [&](int i) {
        tok[i] = tokens_of(group_norm(xs[i], blk.gn_self));
        q[i] = project_tokens(tok[i], blk.self_w.w_q);
        k[i] = project_tokens(tok[i], blk.self_w.w_k);
        v[i] = project_tokens(tok[i], blk.self_w.w_v);
    });

    if (control && control->capture_into) {
        for (int i = 0; i < n; ++i)
            control->capture_into->capture(tau, blk.layer_id, frame_labels[i], q[i], k[i]);
    }
    const bool inject = control && control->injects(blk.layer_id);

    // prompt K/V shared across the batch; the projections carry no bias, so
    // a null prompt makes the whole cross-attention an exact zero update
    const bool use_cross = !prompt.is_null();
    Mat kc, vc;
    if (use_cross) {
        kc = project_tokens(prompt.tokens, blk.w_kc);
        vc = project_tokens(prompt.tokens, blk.w_vc);
    }

    parallel_for(n, [&](int i) {
        const std::vector<int>& ctx = context[i];
        // K^E/V^E: concatenation over the context frames (projection is
        // row-wise, so concatenating projected rows matches projecting the
        // concatenated tokens)
        int rows = 0;
        for (int c : ctx)
            rows += k[c].rows;
        Mat ke(rows, k[i].cols), ve(rows, v[i].cols);
        const Mat* q_use = &q[i];
        Mat q_src;
        if (inject) {
            const AttentionCache& cache = *control->inject_from;
            q_src = cache.lookup(tau, blk.layer_id, frame_labels[i]).q;
            if (q_src.rows != q[i].rows || q_src.cols != q[i].cols)
                throw std::runtime_error("attention injection: cached Q shape mismatch");
            q_use = &q_src;
            int r = 0;
            for (int c : ctx) {
                const Mat& ksrc = cache.lookup(tau, blk.layer_id, frame_labels[c]).k;
                if (ksrc.cols != ke.cols || ksrc.rows != k[c].rows)
                    throw std::runtime_error("attention injection: cached K shape mismatch");
                std::copy(ksrc.v.begin(), ksrc.v.end(),
                          ke.v.begin() + static_cast<size_t>(r) * ke.cols);
                r += ksrc.rows;
            }
        } else {
            int r = 0;
            for (int c : ctx) {
                std::copy(k[c].v.begin(), k[c].v.end(),
                          ke.v.begin() + static_cast<size_t>(r) * ke.cols);
                r += k[c].rows;
            }
        }
        int r = 0;
        for (int c : ctx) {
            std::copy(v[c].v.begin(), v[c].v.end(),
                      ve.v.begin() + static_cast<size_t>(r) * ve.cols);
            r += v[c].rows;
        }

        Mat att = attention_from_qkv(*q_use, ke, ve);
        Mat out = project_tokens(att, blk.w_o);
        kernels::axpy(1.0f, out.v.data(), xs[i].v.data(), xs[i].size());

        // cross-attention to the prompt
        if (use_cross) {
            Mat tok2 = tokens_of(group_norm(xs[i], blk.gn_cross));
            Mat qc = project_tokens(tok2, blk.w_qc);
            Mat cr = attention_from_qkv(qc, kc, vc);
            Mat cro = project_tokens(cr, blk.w_oc);
            kernels::axpy(1.0f, cro.v.data(), xs[i].v.data(), xs[i].size());
        }
    });
}

} // namespace

std::vector<Slice2D> UNet::forward(const std::vector<const Slice2D*>& inputs, int tau,
                                   const PromptEmbedding& p,
                                   const std::vector<std::vector<int>>& context,
                                   const std::vector<int>& frame_labels,
                                   const AttentionControl* control) const {
    const int n = static_cast<int>(inputs.size());
    const Slice2D& first = *inputs[0];
    for (const Slice2D* s : inputs) {
        if (s->channels != geo.channels)
            throw std::invalid_argument("toy U-Net: input has " + std::to_string(s->channels) +
                                        " channels, network expects " +
                                        std::to_string(geo.channels));
        if (s->rows % 4 != 0 || s->cols % 4 != 0 || s->rows < 8 || s->cols < 8)
            throw std::invalid_argument("toy U-Net: spatial dims must be multiples of 4 and "
                                        ">= 8, got " + std::to_string(s->rows) + "x" +
                                        std::to_string(s->cols));
        if (s->rows != first.rows || s->cols != first.cols)
            throw std::invalid_argument("toy U-Net: mixed geometries in one batch");
    }
    for (int i = 0; i < n; ++i) {
        if (context[i].empty())
            throw std::invalid_argument("toy U-Net: empty attention context");
        for (int c : context[i])
            if (c < 0 || c >= n)
                throw std::invalid_argument("toy U-Net: context index out of batch");
    }

    const std::vector<float> temb = timestep_embedding(tau);

    std::vector<FMap> x(n), skipA(n), skipB(n), skipC(n);
    parallel_for(n, [&](int i) {
        FMap in(inputs[i]->rows, inputs[i]->cols, inputs[i]->channels);
        in.v = inputs[i]->data;
        x[i] = conv2d(in, conv_in);
        x[i] = res_block(x[i], res_d0, temb);
        skipA[i] = x[i];
        x[i] = conv2d(x[i], down0);
        x[i] = res_block(x[i], res_d1, temb);
        skipB[i] = x[i];
        x[i] = conv2d(x[i], down1);
        skipC[i] = x[i];
        x[i] = res_block(x[i], res_m1, temb);
    });

    attn_block_batch(x, attn_mid, tau, p, context, frame_labels, control);

    parallel_for(n, [&](int i) {
        x[i] = res_block(x[i], res_m2, temb);
        x[i] = res_block(concat_channels(x[i], skipC[i]), res_u1, temb);
    });

    attn_block_batch(x, attn_up1, tau, p, context, frame_labels, control);

    parallel_for(n, [&](int i) {
        x[i] = conv2d(upsample2x(x[i]), upconv1);
        x[i] = res_block(concat_channels(x[i], skipB[i]), res_u0, temb);
    });

    attn_block_batch(x, attn_up0, tau, p, context, frame_labels, control);

    std::vector<Slice2D> out(n);
    parallel_for(n, [&](int i) {
        x[i] = conv2d(upsample2x(x[i]), upconv0);
        x[i] = res_block(concat_channels(x[i], skipA[i]), res_out, temb);
        FMap f = group_norm(x[i], gn_out);
        silu_inplace(f);
        f = conv2d(f, conv_out);
        Slice2D s(inputs[i]->rows, inputs[i]->cols, inputs[i]->channels, inputs[i]->axis,
                  inputs[i]->index);
        s.data = std::move(f.v);
        out[i] = std::move(s);
    });
    return out;
}

} // namespace stvedit
