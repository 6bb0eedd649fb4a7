#include "stvedit/inflated.hpp"

#include "stvedit/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace stvedit {

std::vector<std::vector<int>> keyframe_contexts(int n_frames) {
    std::vector<std::vector<int>> ctx(n_frames);
    for (int start = 0; start < n_frames; start += kKeyFrameWindow) {
        KeyFramePlan plan = select_keyframes(start, n_frames);
        for (int f = start; f < start + plan.window_length; ++f)
            ctx[f] = {f, plan.global_frame, plan.local_frames[0], plan.local_frames[1]};
    }
    return ctx;
}

namespace {

std::vector<Slice2D> frames_of(const VideoVolume& v) {
    std::vector<Slice2D> out;
    out.reserve(v.n_frames);
    for (int t = 0; t < v.n_frames; ++t)
        out.push_back(slice(v, SliceAxis::XY, t));
    return out;
}

VideoVolume volume_from_frames(const std::vector<Slice2D>& frames, const VideoVolume& like) {
    return assemble(frames, SliceAxis::XY, like.n_frames, like.height, like.width,
                    like.channels, like.space);
}

std::vector<const Slice2D*> ptrs(const std::vector<Slice2D>& xs) {
    std::vector<const Slice2D*> p;
    p.reserve(xs.size());
    for (const auto& x : xs)
        p.push_back(&x);
    return p;
}

} // namespace

VideoVolume epsilon_ea(const DenoiserHandle& d, const NoiseSchedule& sched,
                       const VideoVolume& latents, int tau, const PromptEmbedding& prompt,
                       double cfg_strength, const AttentionControl* control) {
    if (control && control->inject_from && control->capture_into)
        throw std::invalid_argument("epsilon_ea: cannot capture and inject at once");

    const std::vector<Slice2D> frames = frames_of(latents);
    const std::vector<const Slice2D*> xs = ptrs(frames);
    std::vector<std::vector<int>> ctx = keyframe_contexts(latents.n_frames);
    std::vector<int> labels(latents.n_frames);
    for (int f = 0; f < latents.n_frames; ++f)
        labels[f] = f;

    // conditional branch carries the attention surgery
    std::vector<Slice2D> cond =
        predict_noise_batch(d, xs, tau, sched, prompt, ctx, labels, control);

    if (cfg_strength == 1.0 || prompt.is_null()) {
        // guidance is the identity here; skip the second pass
        return volume_from_frames(cond, latents);
    }

    static const PromptEmbedding kNull = embed_prompt("");
    std::vector<Slice2D> uncond =
        predict_noise_batch(d, xs, tau, sched, kNull, ctx, labels, nullptr);

    std::vector<Slice2D> guided(cond.size());
    for (size_t i = 0; i < cond.size(); ++i)
        guided[i] = cfg(cond[i], uncond[i], cfg_strength);
    return volume_from_frames(guided, latents);
}

VideoVolume epsilon_s(const DenoiserHandle& d, const NoiseSchedule& sched,
                      const VideoVolume& latents, int tau, bool use_xt, int seg_len) {
    if (latents.n_frames != seg_len)
        throw std::invalid_argument("epsilon_s: volume has " + std::to_string(latents.n_frames) +
                                    " frames but the slice geometry expects " +
                                    std::to_string(seg_len) +
                                    " (segment or interpolate first)");
    static const PromptEmbedding kNull = embed_prompt("");

    auto denoise_axis = [&](SliceAxis axis, int extent) {
        std::vector<Slice2D> slices;
        slices.reserve(extent);
        for (int i = 0; i < extent; ++i)
            slices.push_back(slice(latents, axis, i));
        const std::vector<const Slice2D*> xs = ptrs(slices);
        std::vector<std::vector<int>> ctx(extent);
        std::vector<int> labels(extent);
        for (int i = 0; i < extent; ++i) {
            ctx[i] = {i}; // plain self-attention, no surgery
            labels[i] = i;
        }
        std::vector<Slice2D> pred =
            predict_noise_batch(d, xs, tau, sched, kNull, ctx, labels, nullptr);
        return assemble(pred, axis, latents.n_frames, latents.height, latents.width,
                        latents.channels, latents.space);
    };

    VideoVolume yt = denoise_axis(SliceAxis::YT, latents.width);
    if (!use_xt)
        return yt;
    VideoVolume xt = denoise_axis(SliceAxis::XT, latents.height);
    // variance-preserving average of the two slice families
    VideoVolume out(latents.n_frames, latents.height, latents.width, latents.channels,
                    latents.space);
    const float w = static_cast<float>(1.0 / std::sqrt(2.0));
    kernels::axpby(w, yt.data.data(), w, xt.data.data(), out.data.data(), out.size());
    return out;
}

VideoVolume combine_predictions(const VideoVolume& ea, const VideoVolume& s, double gamma) {
    if (!ea.same_geometry(s))
        throw std::invalid_argument("combine_predictions: branch geometry mismatch");
    if (gamma < 0.0 || gamma > 1.0)
        throw std::invalid_argument("combine_predictions: gamma outside [0, 1]");
    VideoVolume out(ea.n_frames, ea.height, ea.width, ea.channels, ea.space);
    kernels::axpby(static_cast<float>(std::sqrt(gamma)), ea.data.data(),
                   static_cast<float>(std::sqrt(1.0 - gamma)), s.data.data(),
                   out.data.data(), out.size());
    return out;
}

VideoVolume epsilon_v(const DenoiserHandle& d, const NoiseSchedule& sched,
                      const VideoVolume& latents, int tau, const PromptEmbedding& prompt,
                      const InflationConfig& cfg, const AttentionControl* control) {
    if (cfg.gamma < 0.0 || cfg.gamma > 1.0)
        throw std::invalid_argument("epsilon_v: gamma outside [0, 1]");
    if (cfg.gamma == 1.0)
        return epsilon_ea(d, sched, latents, tau, prompt, cfg.cfg_strength_EA, control);
    if (cfg.gamma == 0.0)
        return epsilon_s(d, sched, latents, tau, cfg.use_xt_slices, cfg.seg_len);
    VideoVolume ea = epsilon_ea(d, sched, latents, tau, prompt, cfg.cfg_strength_EA, control);
    VideoVolume s = epsilon_s(d, sched, latents, tau, cfg.use_xt_slices, cfg.seg_len);
    return combine_predictions(ea, s, cfg.gamma);
}

} // namespace stvedit
