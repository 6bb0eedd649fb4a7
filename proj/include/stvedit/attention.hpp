#pragma once

#include "stvedit/mat.hpp"

#include <map>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

namespace stvedit {

// Q/K/V with the projections that produced them. Q and K share dim d;
// K and V rows are aligned.
struct AttentionTensors {
    Mat q;   // (n_q, d)
    Mat k;   // (n_k, d)
    Mat v;   // (n_k, d_v)
    Mat w_q; // (d, c)
    Mat w_k; // (d, c)
    Mat w_v; // (d_v, c)
};

struct AttentionWeights {
    Mat w_q; // (d, c)
    Mat w_k; // (d, c)
    Mat w_v; // (d_v, c)
};

// One global key-frame (mid-video) plus two local ones (positions 2 and 5,
// 1-based, of the 6-frame window holding the target frame).
struct KeyFramePlan {
    int global_frame = 0;
    int local_frames[2] = {0, 0};
    int window_start = 0;
    int window_length = 0;
};

// tokens (n, c) * W^T (d, c) -> (n, d)
Mat project_tokens(const Mat& tokens, const Mat& w);

// softmax(Q K^T / sqrt(d)) V; rows of the weight matrix sum to 1.
Mat attention_from_qkv(const Mat& q, const Mat& k, const Mat& v);

Mat self_attention(const AttentionTensors& at);

// Eq.-style extended attention: Q from the target frame's tokens, K/V from
// the concatenation of the context frames' tokens (the caller includes the
// frame itself in `context` when it should attend to itself). A context of
// just the frame degenerates to plain self-attention.
Mat extended_attention(const Mat& frame_tokens,
                       const std::vector<const Mat*>& context,
                       const AttentionWeights& w);

// Key-frame choice for the window starting at window_start. Windows tile the
// video in consecutive non-overlapping 6-frame runs; a short tail clamps the
// local positions into range.
KeyFramePlan select_keyframes(int window_start, int n_frames);
constexpr int kKeyFrameWindow = 6;

// Stored (Q, K) per (timestep, layer, frame), write-once. Concurrent capture
// of distinct keys is fine; reads may run concurrently with each other.
class AttentionCache {
public:
    struct Entry {
        Mat q;
        Mat k;
    };

    // Throws std::invalid_argument when the key was already written.
    void capture(int tau, int layer, int frame, Mat q, Mat k);

    // Hard error (std::runtime_error) on a miss: an injection-scheduled step
    // found no matching capture, i.e. inversion/sampling configs diverged.
    const Entry& lookup(int tau, int layer, int frame) const;

    bool has(int tau, int layer, int frame) const;
    size_t entry_count() const;

    // Debug dump into the STW1 container ("q_t%03d_l%d_f%03d" / "k_...").
    void save_debug(const std::string& path) const;

private:
    using Key = std::tuple<int, int, int>;
    std::map<Key, Entry> entries_;
    mutable std::shared_mutex mu_;
};

// Routing for attention surgery inside a denoiser forward pass.
// capture_into is used during inversion, inject_from during sampling;
// they are never set together.
struct AttentionControl {
    AttentionCache* capture_into = nullptr;
    const AttentionCache* inject_from = nullptr;
    std::vector<int> inject_layers; // layer ids where injection replaces Q/K

    bool injects(int layer) const {
        if (inject_from == nullptr)
            return false;
        for (int l : inject_layers)
            if (l == layer)
                return true;
        return false;
    }
};

} // namespace stvedit
