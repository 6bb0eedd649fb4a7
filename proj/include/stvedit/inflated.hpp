#pragma once

#include "stvedit/attention.hpp"
#include "stvedit/denoisers.hpp"
#include "stvedit/schedule.hpp"
#include "stvedit/stvolume.hpp"

namespace stvedit {

// Balance and guidance settings for the inflated video denoiser.
struct InflationConfig {
    double gamma = 0.8;           // weight between frame and slice branches
    double cfg_strength_EA = 10.0;
    double cfg_strength_S = 1.0;  // with the null prompt this is a no-op
    bool use_xt_slices = false;
    int seg_len = 64;             // frame count the slice branch expects
};

// Per-frame denoising with extended attention over each frame's key-frame
// plan (the frame itself plus one global and two local key-frames), with
// classifier-free guidance against the null prompt. `control` routes
// attention capture/injection on the conditional branch.
VideoVolume epsilon_ea(const DenoiserHandle& d, const NoiseSchedule& sched,
                       const VideoVolume& latents, int tau, const PromptEmbedding& prompt,
                       double cfg_strength, const AttentionControl* control = nullptr);

// Per-slice denoising of the y-t planes (plus x-t planes when use_xt is set,
// averaged with 1/sqrt(2) weights) under the null prompt. No attention
// surgery. Requires n_frames == seg_len.
VideoVolume epsilon_s(const DenoiserHandle& d, const NoiseSchedule& sched,
                      const VideoVolume& latents, int tau, bool use_xt, int seg_len);

// sqrt(gamma) * ea + sqrt(1-gamma) * s. gamma endpoints skip the unused
// branch entirely.
VideoVolume epsilon_v(const DenoiserHandle& d, const NoiseSchedule& sched,
                      const VideoVolume& latents, int tau, const PromptEmbedding& prompt,
                      const InflationConfig& cfg, const AttentionControl* control = nullptr);

// The Eq.-style variance-preserving combination on its own (also used by the
// acceptance checks).
VideoVolume combine_predictions(const VideoVolume& ea, const VideoVolume& s, double gamma);

// Key-frame context (batch indices) for every frame of an n-frame segment:
// [self, global, local2, local5] per the 6-frame window tiling.
std::vector<std::vector<int>> keyframe_contexts(int n_frames);

} // namespace stvedit
