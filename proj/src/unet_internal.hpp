#pragma once

// Internal toy U-Net structure. Two 2x down/up levels with skip
// connections; self/extended attention plus prompt cross-attention at the
// bottleneck and in both up blocks, which are the surgery points the
// editing pipeline captures from and injects into.

#include "stvedit/attention.hpp"
#include "stvedit/denoisers.hpp"
#include "stvedit/mat.hpp"
#include "stvedit/stw1.hpp"

#include <string>
#include <vector>

namespace stvedit {

struct Conv2D {
    Mat w;  // (c_out, c_in * kh * kw)
    std::vector<float> b;
    int c_in = 0, c_out = 0, k = 3, stride = 1;
};

struct GroupNorm {
    std::vector<float> gamma, beta;
    int groups = 8;
};

struct Linear {
    Mat w; // (out, in)
    std::vector<float> b;
};

struct ResBlock {
    GroupNorm gn1;
    Conv2D conv1;
    Linear temb; // (c_out, temb_dim)
    GroupNorm gn2;
    Conv2D conv2;
    Conv2D skip; // 1x1, present when c_in != c_out
    bool has_skip = false;
};

struct AttnBlock {
    int layer_id = 0;
    GroupNorm gn_self;
    AttentionWeights self_w; // d = c
    Mat w_o;                 // (c, c)
    GroupNorm gn_cross;
    Mat w_qc;                // (c, c)
    Mat w_kc;                // (c, prompt_dim)
    Mat w_vc;                // (c, prompt_dim)
    Mat w_oc;                // (c, c)
};

class UNet {
public:
    UNetGeometry geo;

    Conv2D conv_in;
    ResBlock res_d0;
    Conv2D down0;
    ResBlock res_d1;
    Conv2D down1;
    ResBlock res_m1;
    AttnBlock attn_mid;
    ResBlock res_m2;
    ResBlock res_u1;
    AttnBlock attn_up1;
    Conv2D upconv1;
    ResBlock res_u0;
    AttnBlock attn_up0;
    Conv2D upconv0;
    ResBlock res_out;
    GroupNorm gn_out;
    Conv2D conv_out;

    static constexpr int kTembDim = 64;

    explicit UNet(const UNetGeometry& g, uint64_t seed);
    explicit UNet(const TensorFile& tf);

    TensorFile to_tensor_file() const;

    // Batched forward; see predict_noise_batch for the contract.
    std::vector<Slice2D> forward(const std::vector<const Slice2D*>& xs, int tau,
                                 const PromptEmbedding& p,
                                 const std::vector<std::vector<int>>& context,
                                 const std::vector<int>& frame_labels,
                                 const AttentionControl* control) const;
};

} // namespace stvedit
