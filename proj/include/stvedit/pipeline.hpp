#pragma once

#include "stvedit/attention.hpp"
#include "stvedit/denoisers.hpp"
#include "stvedit/inflated.hpp"
#include "stvedit/schedule.hpp"
#include "stvedit/stvolume.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace stvedit {

enum class Codec { identity, pool2 };

struct EditConfig {
    int T = 50;
    int T_skip = 8;
    double gamma = 0.8;
    double inject_fraction = 0.85;
    double cfg_strength_EA = 10.0;
    double cfg_strength_S = 1.0;
    int seg_len = 64;
    double eta = 1.0; // 1 = DDPM, 0 = DDIM ablation
    uint64_t seed = 0;
    Codec codec = Codec::identity;
    bool use_xt_slices = false;
    double beta_start = 0.00085;
    double beta_end = 0.012;

    void validate() const; // throws std::invalid_argument
    NoiseSchedule schedule() const;
    InflationConfig inflation() const;
};

// Flat `key = value` files; keys are exactly the EditConfig field names and
// unknown keys are errors. '#' starts a comment.
EditConfig load_config(const std::string& path, EditConfig base = {});
void apply_override(EditConfig& cfg, const std::string& key, const std::string& value);
void print_config(const EditConfig& cfg, std::ostream& out);

// Per-segment end state of the forward trajectory plus the captured
// attention; write-once, then read-only during sampling.
struct SegmentRecord {
    VideoVolume x_terminal; // I_T
    VideoVolume x_start;    // I_{T - T_skip}
    std::shared_ptr<AttentionCache> cache;
};

struct InversionRecord {
    EditConfig config; // snapshot taken at inversion time
    PromptEmbedding p_src;
    SegmentPlan plan;
    // Z[tau] for tau = 1..T, full video length, blended across segments in
    // overlaps; index 0 unused. Empty when eta = 0 (DDIM extracts no noise).
    std::vector<VideoVolume> noise_volumes;
    std::vector<SegmentRecord> segments;

    uint64_t checksum() const; // over the extracted noise + terminal latents
};

struct SampleStats {
    int executed_steps = 0;
    int injected_steps = 0;
};

// Volume DDPM inversion of a single segment (n_frames must equal seg_len).
// Draws the forward trajectory from config.seed, extracts z_tau at every
// step with the inflated denoiser under p_src, and captures attention at
// every (tau, layer, frame). eta = 0 runs the deterministic DDIM inversion
// instead (no noise volumes).
InversionRecord invert(const VideoVolume& latent, const PromptEmbedding& p_src,
                       const EditConfig& config, const DenoiserHandle& d);

// DDPM sampling from the recorded trajectory under p_tar, reusing the
// extracted noise and injecting source attention for the first
// ceil(inject_fraction * (T - T_skip)) executed steps.
VideoVolume sample(const InversionRecord& record, const PromptEmbedding& p_tar,
                   const EditConfig& config, const DenoiserHandle& d,
                   SampleStats* stats = nullptr);

// Frame doubling for short inputs: midpoints in between, last frame
// repeated so the count is exactly 2n. subsample_even() inverts it on the
// original indices.
VideoVolume interpolate_frames(const VideoVolume& video);
VideoVolume subsample_even(const VideoVolume& video, int original_frames);

VideoVolume encode(const VideoVolume& video, Codec codec);
VideoVolume decode(const VideoVolume& latent, Codec codec);

// The segment plan the edit path will use for this input (after the
// interpolation rule is applied).
SegmentPlan edit_plan(int n_frames, const EditConfig& config);

// Full pipeline: encode, interpolate if seg_len/2 < n < seg_len, segment,
// co-evolved per-segment inversion+sampling with per-step blending of noise
// predictions, final blend, decode, subsample back. Output geometry equals
// the input's.
VideoVolume edit(const VideoVolume& video, const std::string& p_src_text,
                 const std::string& p_tar_text, const EditConfig& config,
                 const DenoiserHandle& d, SampleStats* stats = nullptr,
                 InversionRecord* record_out = nullptr);

// Record serialization to the STW1 container. The attention cache is not
// serialized; sampling from a loaded record therefore requires
// inject_fraction = 0.
void save_record(const InversionRecord& record, const std::string& path);
InversionRecord load_record(const std::string& path);

} // namespace stvedit
