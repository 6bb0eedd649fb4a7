#pragma once

#include "stvedit/mat.hpp"
#include "stvedit/stvolume.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace stvedit {

// Dense per-pixel displacement between two consecutive frames.
struct FlowField {
    int height = 0;
    int width = 0;
    std::vector<float> u; // x displacement
    std::vector<float> v; // y displacement

    float uat(int y, int x) const { return u[static_cast<size_t>(y) * width + x]; }
    float vat(int y, int x) const { return v[static_cast<size_t>(y) * width + x]; }
};

struct ConsistencyMask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> keep;

    bool at(int y, int x) const { return keep[static_cast<size_t>(y) * width + x] != 0; }
    size_t kept_count() const;
};

struct FlowOptions {
    double alpha = 10.0; // smoothness weight
    int iterations = 200;
};

// Variational flow: block-Jacobi sweeps on the quadratic data+smoothness
// energy with 4-neighbor coupling. Identical frames give the exact zero
// field. Frames are grayscale-averaged over channels first.
FlowField optical_flow(const Slice2D& frame_a, const Slice2D& frame_b,
                       const FlowOptions& opt = {});

// Energy of a flow candidate under the same discretization (data term +
// alpha^2 * smoothness); the solver must not increase it across sweeps.
double flow_energy(const Slice2D& frame_a, const Slice2D& frame_b, const FlowField& f,
                   double alpha);

// Keep a pixel iff |fwd(p) + bwd(p + fwd(p))| <= 1 with bilinear lookup of
// the backward field; out-of-bounds targets are excluded.
ConsistencyMask lr_mask(const FlowField& flow_fwd, const FlowField& flow_bwd);

// Mean L2 distance between the flow fields of consecutive-frame pairs of the
// two videos, over pixels kept by the source video's left-right check.
double flow_error(const VideoVolume& src_video, const VideoVolume& edit_video,
                  const FlowOptions& opt = {});

// Frame embedding for the consistency score: unit-norm vector per frame.
using FrameEmbedder = std::function<std::vector<float>(const Slice2D&)>;

// Default: seeded random projection of an 8x8 downsample, normalized.
FrameEmbedder make_projection_embedder(uint64_t seed, int out_dim = 32);

// Mean cosine similarity over consecutive frame pairs.
double embed_consistency(const VideoVolume& video, const FrameEmbedder& embedder);

} // namespace stvedit
