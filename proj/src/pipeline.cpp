#include "stvedit/pipeline.hpp"

#include "stvedit/kernels.hpp"
#include "stvedit/rng.hpp"
#include "stvedit/stw1.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace stvedit {

/*================================ config ================================*/

void EditConfig::validate() const {
    if (T < 1)
        throw std::invalid_argument("config: T must be >= 1");
    if (T_skip < 0 || T_skip >= T)
        throw std::invalid_argument("config: need 0 <= T_skip < T");
    if (gamma < 0.0 || gamma > 1.0)
        throw std::invalid_argument("config: gamma outside [0, 1]");
    if (inject_fraction < 0.0 || inject_fraction > 1.0)
        throw std::invalid_argument("config: inject_fraction outside [0, 1]");
    if (cfg_strength_EA < 0.0 || cfg_strength_S < 0.0)
        throw std::invalid_argument("config: guidance strengths must be >= 0");
    if (seg_len < 2)
        throw std::invalid_argument("config: seg_len must be >= 2");
    if (eta < 0.0 || eta > 1.0)
        throw std::invalid_argument("config: eta outside [0, 1]");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw std::invalid_argument("config: need 0 < beta_start <= beta_end < 1");
}

NoiseSchedule EditConfig::schedule() const { return make_schedule(T, beta_start, beta_end, eta); }

InflationConfig EditConfig::inflation() const {
    InflationConfig ic;
    ic.gamma = gamma;
    ic.cfg_strength_EA = cfg_strength_EA;
    ic.cfg_strength_S = cfg_strength_S;
    ic.use_xt_slices = use_xt_slices;
    ic.seg_len = seg_len;
    return ic;
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos)
        return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1")
        return true;
    if (v == "false" || v == "0")
        return false;
    throw std::invalid_argument("config: bad boolean for " + key + ": " + v);
}

double parse_num(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size())
            throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw std::invalid_argument("config: bad number for " + key + ": " + v);
    }
}

int parse_int(const std::string& v, const std::string& key) {
    double d = parse_num(v, key);
    int i = static_cast<int>(d);
    if (static_cast<double>(i) != d)
        throw std::invalid_argument("config: expected integer for " + key + ": " + v);
    return i;
}

std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

} // namespace

void apply_override(EditConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "T")
        cfg.T = parse_int(value, key);
    else if (key == "T_skip")
        cfg.T_skip = parse_int(value, key);
    else if (key == "gamma")
        cfg.gamma = parse_num(value, key);
    else if (key == "inject_fraction")
        cfg.inject_fraction = parse_num(value, key);
    else if (key == "cfg_strength_EA")
        cfg.cfg_strength_EA = parse_num(value, key);
    else if (key == "cfg_strength_S")
        cfg.cfg_strength_S = parse_num(value, key);
    else if (key == "seg_len")
        cfg.seg_len = parse_int(value, key);
    else if (key == "eta")
        cfg.eta = parse_num(value, key);
    else if (key == "seed")
        cfg.seed = static_cast<uint64_t>(parse_num(value, key));
    else if (key == "codec") {
        if (value == "identity")
            cfg.codec = Codec::identity;
        else if (value == "pool2")
            cfg.codec = Codec::pool2;
        else
            throw std::invalid_argument("config: unknown codec: " + value);
    } else if (key == "use_xt_slices")
        cfg.use_xt_slices = parse_bool(value, key);
    else if (key == "beta_start")
        cfg.beta_start = parse_num(value, key);
    else if (key == "beta_end")
        cfg.beta_end = parse_num(value, key);
    else
        throw std::invalid_argument("config: unknown key: " + key);
}

EditConfig load_config(const std::string& path, EditConfig base) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("load_config: cannot open " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " is not `key = value`");
        apply_override(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
}

void print_config(const EditConfig& cfg, std::ostream& out) {
    out << "T = " << cfg.T << "\n";
    out << "T_skip = " << cfg.T_skip << "\n";
    out << "gamma = " << fmt_num(cfg.gamma) << "\n";
    out << "inject_fraction = " << fmt_num(cfg.inject_fraction) << "\n";
    out << "cfg_strength_EA = " << fmt_num(cfg.cfg_strength_EA) << "\n";
    out << "cfg_strength_S = " << fmt_num(cfg.cfg_strength_S) << "\n";
    out << "seg_len = " << cfg.seg_len << "\n";
    out << "eta = " << fmt_num(cfg.eta) << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "codec = " << (cfg.codec == Codec::identity ? "identity" : "pool2") << "\n";
    out << "use_xt_slices = " << (cfg.use_xt_slices ? "true" : "false") << "\n";
    out << "beta_start = " << fmt_num(cfg.beta_start) << "\n";
    out << "beta_end = " << fmt_num(cfg.beta_end) << "\n";
}

/*================================ helpers ================================*/

namespace {

VideoVolume crop_frames(const VideoVolume& v, int start, int len) {
    VideoVolume out(len, v.height, v.width, v.channels, v.space);
    std::copy(v.frame(start), v.frame(start) + out.size(), out.data.data());
    return out;
}

// independent-mode plan view: the diffusion-step quantities being blended
// are noise-like, so overlaps combine with sum-of-squares weights
SegmentPlan noise_plan(const SegmentPlan& plan) {
    SegmentPlan p = plan;
    p.weights_mode = BlendMode::independent;
    return p;
}

SegmentPlan signal_plan(const SegmentPlan& plan) {
    SegmentPlan p = plan;
    p.weights_mode = BlendMode::mean;
    return p;
}

VideoVolume draw_normals_like(const VideoVolume& like, Rng& rng) {
    VideoVolume out(like.n_frames, like.height, like.width, like.channels, like.space);
    for (auto& v : out.data)
        v = rng.normal_f();
    return out;
}

struct SegmentCtx {
    Segment seg;
    Rng rng;
    VideoVolume x0;      // clean latent of this segment
    VideoVolume prev;    // I_{tau-1}
    VideoVolume cur;     // I_tau
    std::shared_ptr<AttentionCache> cache;
};

} // namespace

/*================================ inversion ================================*/

namespace {

InversionRecord invert_segments(const VideoVolume& latent, const SegmentPlan& plan,
                                const PromptEmbedding& p_src, const EditConfig& config,
                                const DenoiserHandle& d) {
    config.validate();
    const NoiseSchedule sched = config.schedule();
    const InflationConfig infl = config.inflation();
    const int tau_start = config.T - config.T_skip;

    InversionRecord rec;
    rec.config = config;
    rec.p_src = p_src;
    rec.plan = plan;
    rec.segments.resize(plan.segments.size());

    std::vector<SegmentCtx> segs;
    for (size_t s = 0; s < plan.segments.size(); ++s) {
        const Segment& seg = plan.segments[s];
        SegmentCtx ctx{seg,
                       Rng(mix_seed(config.seed, 0xF0F0ull, static_cast<uint64_t>(seg.start))),
                       crop_frames(latent, seg.start, seg.length),
                       {},
                       {},
                       std::make_shared<AttentionCache>()};
        rec.segments[s].cache = ctx.cache;
        segs.push_back(std::move(ctx));
    }

    const size_t K = segs.size();
    std::vector<VideoVolume> preds(K);

    if (config.eta > 0.0) {
        rec.noise_volumes.resize(config.T + 1);
        for (auto& ctx : segs)
            ctx.prev = ctx.x0;

        for (int tau = 1; tau <= config.T; ++tau) {
            for (auto& ctx : segs) {
                VideoVolume noise = draw_normals_like(ctx.x0, ctx.rng);
                ctx.cur = VideoVolume(ctx.x0.n_frames, ctx.x0.height, ctx.x0.width,
                                      ctx.x0.channels, ctx.x0.space);
                forward_noise(ctx.x0.data.data(), noise.data.data(), ctx.cur.data.data(),
                              ctx.cur.size(), tau, sched);
            }
            for (size_t s = 0; s < K; ++s) {
                AttentionControl control;
                control.capture_into = segs[s].cache.get();
                preds[s] = epsilon_v(d, sched, segs[s].cur, tau, p_src, infl, &control);
            }
            VideoVolume eps_full = blend_segments(preds, noise_plan(plan));

            std::vector<VideoVolume> zs(K);
            for (size_t s = 0; s < K; ++s) {
                SegmentCtx& ctx = segs[s];
                VideoVolume eps_seg = crop_frames(eps_full, ctx.seg.start, ctx.seg.length);
                VideoVolume mu(ctx.cur.n_frames, ctx.cur.height, ctx.cur.width,
                               ctx.cur.channels, ctx.cur.space);
                mu_hat(ctx.cur.data.data(), eps_seg.data.data(), mu.data.data(), mu.size(),
                       tau, sched);
                zs[s] = VideoVolume(mu.n_frames, mu.height, mu.width, mu.channels, mu.space);
                extract_noise(ctx.prev.data.data(), mu.data.data(), zs[s].data.data(),
                              zs[s].size(), tau, sched);
            }
            rec.noise_volumes[tau] = blend_segments(zs, noise_plan(plan));

            for (size_t s = 0; s < K; ++s) {
                if (tau == tau_start)
                    rec.segments[s].x_start = segs[s].cur;
                segs[s].prev = std::move(segs[s].cur);
            }
        }
        for (size_t s = 0; s < K; ++s)
            rec.segments[s].x_terminal = segs[s].prev; // I_T
    } else {
        // DDIM inversion: deterministic up-steps, no extractable noise
        for (auto& ctx : segs)
            ctx.cur = ctx.x0;
        for (int tau = 1; tau <= config.T; ++tau) {
            for (size_t s = 0; s < K; ++s) {
                AttentionControl control;
                control.capture_into = segs[s].cache.get();
                preds[s] = epsilon_v(d, sched, segs[s].cur, tau, p_src, infl, &control);
            }
            VideoVolume eps_full = blend_segments(preds, noise_plan(plan));
            for (size_t s = 0; s < K; ++s) {
                SegmentCtx& ctx = segs[s];
                VideoVolume eps_seg = crop_frames(eps_full, ctx.seg.start, ctx.seg.length);
                // x_tau = sqrt(abar_tau) * (x_{tau-1} - sqrt(1-abar_{tau-1}) eps) /
                //         sqrt(abar_{tau-1}) + sqrt(1-abar_tau) * eps
                const double a = sched.alpha_bar[tau];
                const double ap = sched.alpha_bar[tau - 1];
                const float cx = static_cast<float>(std::sqrt(a / ap));
                const float ce = static_cast<float>(std::sqrt(1.0 - a) -
                                                    std::sqrt(a * (1.0 - ap) / ap));
                VideoVolume next(ctx.cur.n_frames, ctx.cur.height, ctx.cur.width,
                                 ctx.cur.channels, ctx.cur.space);
                kernels::axpby(cx, ctx.cur.data.data(), ce, eps_seg.data.data(),
                               next.data.data(), next.size());
                ctx.cur = std::move(next);
                if (tau == tau_start)
                    rec.segments[s].x_start = ctx.cur;
            }
        }
        for (size_t s = 0; s < K; ++s)
            rec.segments[s].x_terminal = segs[s].cur;
    }
    return rec;
}

} // namespace

InversionRecord invert(const VideoVolume& latent, const PromptEmbedding& p_src,
                       const EditConfig& config, const DenoiserHandle& d) {
    if (latent.n_frames != config.seg_len)
        throw std::invalid_argument(
            "invert: volume has " + std::to_string(latent.n_frames) +
            " frames, config.seg_len is " + std::to_string(config.seg_len) +
            " (the edit path handles segmentation)");
    SegmentPlan plan = segment_plan(latent.n_frames, config.seg_len);
    return invert_segments(latent, plan, p_src, config, d);
}

/*================================ sampling ================================*/

namespace {

VideoVolume sample_segments(const InversionRecord& rec, const PromptEmbedding& p_tar,
                            const EditConfig& config, const DenoiserHandle& d,
                            SampleStats* stats) {
    config.validate();
    if (config.T != rec.config.T || config.T_skip != rec.config.T_skip ||
        config.eta != rec.config.eta || config.seg_len != rec.config.seg_len)
        throw std::invalid_argument("sample: config T/T_skip/eta/seg_len differ from the "
                                    "inversion record snapshot");
    if (config.eta > 0.0) {
        for (int tau = 1; tau <= config.T; ++tau)
            if (static_cast<size_t>(tau) >= rec.noise_volumes.size() ||
                rec.noise_volumes[tau].size() == 0)
                throw std::invalid_argument("sample: record is missing noise volume z_" +
                                            std::to_string(tau));
    }

    const NoiseSchedule sched = config.schedule();
    const InflationConfig infl = config.inflation();
    const SegmentPlan& plan = rec.plan;
    const size_t K = plan.segments.size();

    const int tau_start = config.T - config.T_skip;
    const int n_inject = static_cast<int>(
        std::ceil(config.inject_fraction * static_cast<double>(tau_start) - 1e-12));
    if (stats) {
        stats->executed_steps = tau_start;
        stats->injected_steps = n_inject;
    }

    std::vector<VideoVolume> J(K);
    for (size_t s = 0; s < K; ++s)
        J[s] = rec.segments[s].x_start;

    std::vector<VideoVolume> preds(K);
    for (int tau = tau_start; tau >= 1; --tau) {
        const bool injecting = (tau_start - tau) < n_inject;
        for (size_t s = 0; s < K; ++s) {
            AttentionControl control;
            if (injecting) {
                control.inject_from = rec.segments[s].cache.get();
                control.inject_layers = unet_upsample_attn_layers();
            }
            preds[s] = epsilon_v(d, sched, J[s], tau, p_tar, infl,
                                 injecting ? &control : nullptr);
        }
        VideoVolume eps_full = blend_segments(preds, noise_plan(plan));
        for (size_t s = 0; s < K; ++s) {
            VideoVolume eps_seg = crop_frames(eps_full, plan.segments[s].start,
                                              plan.segments[s].length);
            VideoVolume mu(J[s].n_frames, J[s].height, J[s].width, J[s].channels, J[s].space);
            mu_hat(J[s].data.data(), eps_seg.data.data(), mu.data.data(), mu.size(), tau,
                   sched);
            if (config.eta > 0.0) {
                VideoVolume z_seg = crop_frames(rec.noise_volumes[tau],
                                                plan.segments[s].start, plan.segments[s].length);
                kernels::axpby(1.0f, mu.data.data(),
                               static_cast<float>(sched.sigma[tau]), z_seg.data.data(),
                               J[s].data.data(), J[s].size());
            } else {
                J[s] = std::move(mu);
            }
        }
    }
    return blend_segments(J, signal_plan(plan));
}

} // namespace

VideoVolume sample(const InversionRecord& record, const PromptEmbedding& p_tar,
                   const EditConfig& config, const DenoiserHandle& d, SampleStats* stats) {
    return sample_segments(record, p_tar, config, d, stats);
}

/*================================ interpolation & codecs ================================*/

VideoVolume interpolate_frames(const VideoVolume& video) {
    if (video.n_frames < 2)
        throw std::invalid_argument("interpolate_frames: need at least 2 frames");
    const int n = video.n_frames;
    VideoVolume out(2 * n, video.height, video.width, video.channels, video.space);
    const size_t fs = video.frame_size();
    for (int i = 0; i < n; ++i) {
        std::copy(video.frame(i), video.frame(i) + fs, out.frame(2 * i));
        if (i + 1 < n) {
            kernels::axpby(0.5f, video.frame(i), 0.5f, video.frame(i + 1),
                           out.frame(2 * i + 1), fs);
        } else {
            // pad 2n-1 to 2n by repeating the last frame
            std::copy(video.frame(i), video.frame(i) + fs, out.frame(2 * i + 1));
        }
    }
    return out;
}

VideoVolume subsample_even(const VideoVolume& video, int original_frames) {
    if (video.n_frames < 2 * original_frames - 1)
        throw std::invalid_argument("subsample_even: video too short");
    VideoVolume out(original_frames, video.height, video.width, video.channels, video.space);
    const size_t fs = video.frame_size();
    for (int i = 0; i < original_frames; ++i)
        std::copy(video.frame(2 * i), video.frame(2 * i) + fs, out.frame(i));
    return out;
}

VideoVolume encode(const VideoVolume& video, Codec codec) {
    if (codec == Codec::identity) {
        VideoVolume out = video;
        out.space = Space::latent;
        return out;
    }
    if (video.height % 2 != 0 || video.width % 2 != 0)
        throw std::invalid_argument("encode: pool2 needs even height and width");
    VideoVolume out(video.n_frames, video.height / 2, video.width / 2, video.channels,
                    Space::latent);
    for (int t = 0; t < video.n_frames; ++t)
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x)
                for (int c = 0; c < video.channels; ++c)
                    out.at(t, y, x, c) = 0.25f * (video.at(t, 2 * y, 2 * x, c) +
                                                  video.at(t, 2 * y, 2 * x + 1, c) +
                                                  video.at(t, 2 * y + 1, 2 * x, c) +
                                                  video.at(t, 2 * y + 1, 2 * x + 1, c));
    return out;
}

VideoVolume decode(const VideoVolume& latent, Codec codec) {
    VideoVolume out;
    if (codec == Codec::identity) {
        out = latent;
    } else {
        out = VideoVolume(latent.n_frames, latent.height * 2, latent.width * 2,
                          latent.channels, Space::pixel);
        for (int t = 0; t < latent.n_frames; ++t)
            for (int y = 0; y < out.height; ++y)
                for (int x = 0; x < out.width; ++x)
                    for (int c = 0; c < latent.channels; ++c)
                        out.at(t, y, x, c) = latent.at(t, y / 2, x / 2, c);
    }
    out.space = Space::pixel;
    for (auto& v : out.data)
        v = std::clamp(v, -1.0f, 1.0f);
    return out;
}

/*================================ edit ================================*/

SegmentPlan edit_plan(int n_frames, const EditConfig& config) {
    int n = n_frames;
    if (n <= config.seg_len / 2)
        throw std::invalid_argument("edit: too few frames (" + std::to_string(n) +
                                    "); need more than seg_len/2 = " +
                                    std::to_string(config.seg_len / 2));
    if (n < config.seg_len)
        n = 2 * n; // interpolation doubles the frame count first
    return segment_plan(n, config.seg_len);
}

VideoVolume edit(const VideoVolume& video, const std::string& p_src_text,
                 const std::string& p_tar_text, const EditConfig& config,
                 const DenoiserHandle& d, SampleStats* stats, InversionRecord* record_out) {
    config.validate();
    const int n_in = video.n_frames;
    if (n_in <= config.seg_len / 2)
        throw std::invalid_argument("edit: too few frames (" + std::to_string(n_in) +
                                    "); need more than seg_len/2 = " +
                                    std::to_string(config.seg_len / 2));

    VideoVolume work = video;
    bool interpolated = false;
    if (n_in < config.seg_len) {
        work = interpolate_frames(video);
        interpolated = true;
    }

    VideoVolume latent = encode(work, config.codec);
    SegmentPlan plan = segment_plan(latent.n_frames, config.seg_len);

    const PromptEmbedding p_src = embed_prompt(p_src_text);
    const PromptEmbedding p_tar = embed_prompt(p_tar_text);

    InversionRecord rec = invert_segments(latent, plan, p_src, config, d);
    VideoVolume edited_latent = sample_segments(rec, p_tar, config, d, stats);
    if (record_out)
        *record_out = std::move(rec);

    VideoVolume out = decode(edited_latent, config.codec);
    if (interpolated)
        out = subsample_even(out, n_in);
    return out;
}

/*================================ record i/o ================================*/

uint64_t InversionRecord::checksum() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& z : noise_volumes)
        if (z.size() > 0)
            h = fnv1a_bytes(z.data.data(), z.data.size() * sizeof(float), h);
    for (const auto& s : segments) {
        h = fnv1a_bytes(s.x_terminal.data.data(), s.x_terminal.data.size() * sizeof(float), h);
        h = fnv1a_bytes(s.x_start.data.data(), s.x_start.data.size() * sizeof(float), h);
    }
    return h;
}

namespace {

std::vector<uint32_t> vol_dims(const VideoVolume& v) {
    return {static_cast<uint32_t>(v.n_frames), static_cast<uint32_t>(v.height),
            static_cast<uint32_t>(v.width), static_cast<uint32_t>(v.channels)};
}

VideoVolume vol_from_tensor(const NamedTensor& t) {
    if (t.dims.size() != 4)
        throw std::runtime_error("record: tensor " + t.name + " is not a volume");
    VideoVolume v(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]),
                  static_cast<int>(t.dims[2]), static_cast<int>(t.dims[3]), Space::latent);
    v.data = t.data;
    return v;
}

} // namespace

void save_record(const InversionRecord& record, const std::string& path) {
    TensorFile tf;
    const EditConfig& c = record.config;
    tf.add("config", {13},
           {static_cast<float>(c.T), static_cast<float>(c.T_skip), static_cast<float>(c.gamma),
            static_cast<float>(c.inject_fraction), static_cast<float>(c.cfg_strength_EA),
            static_cast<float>(c.cfg_strength_S), static_cast<float>(c.seg_len),
            static_cast<float>(c.eta), static_cast<float>(c.seed),
            static_cast<float>(c.codec == Codec::pool2 ? 1 : 0),
            static_cast<float>(c.use_xt_slices ? 1 : 0), static_cast<float>(c.beta_start),
            static_cast<float>(c.beta_end)});
    tf.add("p_src_tokens",
           {static_cast<uint32_t>(record.p_src.tokens.rows),
            static_cast<uint32_t>(record.p_src.tokens.cols)},
           record.p_src.tokens.v);
    std::vector<float> plan_data;
    for (const Segment& s : record.plan.segments) {
        plan_data.push_back(static_cast<float>(s.start));
        plan_data.push_back(static_cast<float>(s.length));
    }
    plan_data.push_back(static_cast<float>(record.plan.n_frames));
    const uint32_t plan_len = static_cast<uint32_t>(plan_data.size());
    tf.add("plan", {plan_len}, std::move(plan_data));

    char name[32];
    for (size_t tau = 1; tau < record.noise_volumes.size(); ++tau) {
        std::snprintf(name, sizeof(name), "z_%03zu", tau);
        tf.add(name, vol_dims(record.noise_volumes[tau]), record.noise_volumes[tau].data);
    }
    for (size_t s = 0; s < record.segments.size(); ++s) {
        std::snprintf(name, sizeof(name), "x_terminal_s%02zu", s);
        tf.add(name, vol_dims(record.segments[s].x_terminal), record.segments[s].x_terminal.data);
        std::snprintf(name, sizeof(name), "x_start_s%02zu", s);
        tf.add(name, vol_dims(record.segments[s].x_start), record.segments[s].x_start.data);
    }
    save_stw1(tf, path);
}

InversionRecord load_record(const std::string& path) {
    TensorFile tf = load_stw1(path);
    const NamedTensor* ct = tf.find("config");
    if (!ct || ct->data.size() != 13)
        throw std::runtime_error("load_record: missing config tensor");
    InversionRecord rec;
    EditConfig& c = rec.config;
    c.T = static_cast<int>(ct->data[0]);
    c.T_skip = static_cast<int>(ct->data[1]);
    c.gamma = ct->data[2];
    c.inject_fraction = ct->data[3];
    c.cfg_strength_EA = ct->data[4];
    c.cfg_strength_S = ct->data[5];
    c.seg_len = static_cast<int>(ct->data[6]);
    c.eta = ct->data[7];
    c.seed = static_cast<uint64_t>(ct->data[8]);
    c.codec = ct->data[9] != 0.0f ? Codec::pool2 : Codec::identity;
    c.use_xt_slices = ct->data[10] != 0.0f;
    c.beta_start = ct->data[11];
    c.beta_end = ct->data[12];

    const NamedTensor* pt = tf.find("p_src_tokens");
    if (!pt || pt->dims.size() != 2)
        throw std::runtime_error("load_record: missing p_src_tokens");
    rec.p_src.tokens = Mat(static_cast<int>(pt->dims[0]), static_cast<int>(pt->dims[1]));
    rec.p_src.tokens.v = pt->data;
    rec.p_src.source_text = "(loaded)";

    const NamedTensor* pl = tf.find("plan");
    if (!pl || pl->data.size() % 2 != 1)
        throw std::runtime_error("load_record: missing plan");
    for (size_t i = 0; i + 1 < pl->data.size(); i += 2)
        rec.plan.segments.push_back({static_cast<int>(pl->data[i]),
                                     static_cast<int>(pl->data[i + 1])});
    rec.plan.n_frames = static_cast<int>(pl->data.back());

    if (c.eta > 0.0) {
        rec.noise_volumes.resize(c.T + 1);
        char name[32];
        for (int tau = 1; tau <= c.T; ++tau) {
            std::snprintf(name, sizeof(name), "z_%03d", tau);
            const NamedTensor* t = tf.find(name);
            if (!t)
                throw std::runtime_error("load_record: missing tensor " + std::string(name));
            rec.noise_volumes[tau] = vol_from_tensor(*t);
        }
    }
    rec.segments.resize(rec.plan.segments.size());
    char name[32];
    for (size_t s = 0; s < rec.segments.size(); ++s) {
        std::snprintf(name, sizeof(name), "x_terminal_s%02zu", s);
        const NamedTensor* t1 = tf.find(name);
        std::snprintf(name, sizeof(name), "x_start_s%02zu", s);
        const NamedTensor* t2 = tf.find(name);
        if (!t1 || !t2)
            throw std::runtime_error("load_record: missing segment tensors");
        rec.segments[s].x_terminal = vol_from_tensor(*t1);
        rec.segments[s].x_start = vol_from_tensor(*t2);
        rec.segments[s].cache = std::make_shared<AttentionCache>(); // not serialized
    }
    return rec;
}

} // namespace stvedit
