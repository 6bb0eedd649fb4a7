#include "stvedit/attention.hpp"

#include "stvedit/kernels.hpp"
#include "stvedit/stw1.hpp"

#include <cmath>
#include <cstdio>
#include <mutex>
#include <stdexcept>
#include <string>

namespace stvedit {

Mat project_tokens(const Mat& tokens, const Mat& w) {
    if (tokens.cols != w.cols)
        throw std::invalid_argument("project_tokens: token dim " + std::to_string(tokens.cols) +
                                    " != projection input dim " + std::to_string(w.cols));
    Mat out(tokens.rows, w.rows);
    kernels::gemm_nt(tokens.v.data(), w.v.data(), out.v.data(), tokens.rows, w.rows, tokens.cols);
    return out;
}

Mat attention_from_qkv(const Mat& q, const Mat& k, const Mat& v) {
    if (q.cols != k.cols)
        throw std::invalid_argument("attention: Q/K dim mismatch");
    if (k.rows != v.rows)
        throw std::invalid_argument("attention: K/V row mismatch");
    if (k.rows == 0)
        throw std::invalid_argument("attention: empty key set");

    static thread_local std::vector<float> logits;
    logits.resize(static_cast<size_t>(q.rows) * k.rows);
    kernels::gemm_nt(q.v.data(), k.v.data(), logits.data(), q.rows, k.rows, q.cols);
    const float scale = 1.0f / std::sqrt(static_cast<float>(q.cols));
    for (int i = 0; i < q.rows; ++i) {
        float* row = logits.data() + static_cast<size_t>(i) * k.rows;
        for (int j = 0; j < k.rows; ++j)
            row[j] *= scale;
        kernels::softmax_row(row, static_cast<size_t>(k.rows));
    }
    Mat out(q.rows, v.cols);
    kernels::gemm_nn(logits.data(), v.v.data(), out.v.data(), q.rows, v.cols, k.rows);
    return out;
}

Mat self_attention(const AttentionTensors& at) {
    return attention_from_qkv(at.q, at.k, at.v);
}

Mat extended_attention(const Mat& frame_tokens,
                       const std::vector<const Mat*>& context,
                       const AttentionWeights& w) {
    if (context.empty())
        throw std::invalid_argument("extended_attention: empty key-frame set");
    for (const Mat* m : context)
        if (m->cols != frame_tokens.cols)
            throw std::invalid_argument("extended_attention: context token dim mismatch");

    Mat q = project_tokens(frame_tokens, w.w_q);

    int total_rows = 0;
    for (const Mat* m : context)
        total_rows += m->rows;
    Mat cat(total_rows, frame_tokens.cols);
    int r = 0;
    for (const Mat* m : context) {
        std::copy(m->v.begin(), m->v.end(), cat.v.begin() + static_cast<size_t>(r) * cat.cols);
        r += m->rows;
    }
    Mat k = project_tokens(cat, w.w_k);
    Mat v = project_tokens(cat, w.w_v);
    return attention_from_qkv(q, k, v);
}

KeyFramePlan select_keyframes(int window_start, int n_frames) {
    if (n_frames < 1)
        throw std::invalid_argument("select_keyframes: empty video");
    if (window_start < 0 || window_start >= n_frames)
        throw std::invalid_argument("select_keyframes: window_start out of range");
    KeyFramePlan plan;
    plan.window_start = window_start;
    plan.window_length = std::min(kKeyFrameWindow, n_frames - window_start);
    plan.global_frame = n_frames / 2;
    // 1-based positions 2 and 5 within the window, clamped for short tails
    plan.local_frames[0] = std::min(window_start + 1, n_frames - 1);
    plan.local_frames[1] = std::min(window_start + 4, n_frames - 1);
    return plan;
}

void AttentionCache::capture(int tau, int layer, int frame, Mat q, Mat k) {
    std::unique_lock lock(mu_);
    Key key{tau, layer, frame};
    if (entries_.count(key))
        throw std::invalid_argument("AttentionCache: duplicate capture at tau=" +
                                    std::to_string(tau) + " layer=" + std::to_string(layer) +
                                    " frame=" + std::to_string(frame));
    entries_.emplace(key, Entry{std::move(q), std::move(k)});
}

const AttentionCache::Entry& AttentionCache::lookup(int tau, int layer, int frame) const {
    std::shared_lock lock(mu_);
    auto it = entries_.find(Key{tau, layer, frame});
    if (it == entries_.end())
        throw std::runtime_error(
            "AttentionCache: miss at tau=" + std::to_string(tau) + " layer=" +
            std::to_string(layer) + " frame=" + std::to_string(frame) +
            " during an injection-scheduled step (inversion/sampling config mismatch)");
    return it->second;
}

bool AttentionCache::has(int tau, int layer, int frame) const {
    std::shared_lock lock(mu_);
    return entries_.count(Key{tau, layer, frame}) != 0;
}

size_t AttentionCache::entry_count() const {
    std::shared_lock lock(mu_);
    return entries_.size();
}

void AttentionCache::save_debug(const std::string& path) const {
    std::shared_lock lock(mu_);
    TensorFile tf;
    char name[64];
    for (const auto& [key, e] : entries_) {
        auto [tau, layer, frame] = key;
        std::snprintf(name, sizeof(name), "q_t%03d_l%d_f%03d", tau, layer, frame);
        tf.add(name, {static_cast<uint32_t>(e.q.rows), static_cast<uint32_t>(e.q.cols)}, e.q.v);
        std::snprintf(name, sizeof(name), "k_t%03d_l%d_f%03d", tau, layer, frame);
        tf.add(name, {static_cast<uint32_t>(e.k.rows), static_cast<uint32_t>(e.k.cols)}, e.k.v);
    }
    save_stw1(tf, path);
}

} // namespace stvedit
