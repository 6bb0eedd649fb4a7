// stvedit: text-guided space-time video editing at desk scale.
// Subcommands: edit, invert, metrics, experiment, selfcheck.

#include "stvedit/denoisers.hpp"
#include "stvedit/experiments.hpp"
#include "stvedit/inflated.hpp"
#include "stvedit/io.hpp"
#include "stvedit/kernels.hpp"
#include "stvedit/metrics.hpp"
#include "stvedit/parallel.hpp"
#include "stvedit/pipeline.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace stvedit;

constexpr uint64_t kDefaultWeightsSeed = 1337;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    int64_t seed = -1;
    int threads = 1;
    bool print_config = false;
    bool ddim = false;
    bool no_slices = false;
    bool no_inject = false;
    bool xt_slices = false;
    std::string weights_path;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "config file (key = value lines)");
    cmd->add_option("--set", o.overrides, "override a config key, e.g. --set T=20")
        ->type_name("key=value");
    cmd->add_option("--seed", o.seed, "seed override");
    cmd->add_option("--threads", o.threads, "worker threads (0 = auto)");
    cmd->add_flag("--print-config", o.print_config, "print the effective config and exit");
    cmd->add_flag("--ddim", o.ddim, "DDIM ablation (eta = 0)");
    cmd->add_flag("--no-slices", o.no_slices, "disable the slice branch (gamma = 1)");
    cmd->add_flag("--no-inject", o.no_inject, "disable attention injection");
    cmd->add_flag("--xt-slices", o.xt_slices, "denoise x-t slices in addition to y-t");
    cmd->add_option("--weights", o.weights_path, "STW1 denoiser weights to load");
}

EditConfig resolve_config(const CommonOpts& o) {
    EditConfig cfg;
    if (!o.config_path.empty())
        cfg = load_config(o.config_path, cfg);
    for (const std::string& kv : o.overrides) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got: " + kv);
        apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (o.seed >= 0)
        cfg.seed = static_cast<uint64_t>(o.seed);
    if (o.ddim)
        cfg.eta = 0.0;
    if (o.no_slices)
        cfg.gamma = 1.0;
    if (o.no_inject)
        cfg.inject_fraction = 0.0;
    if (o.xt_slices)
        cfg.use_xt_slices = true;
    cfg.validate();
    return cfg;
}

DenoiserHandle resolve_denoiser(const CommonOpts& o, int channels) {
    if (!o.weights_path.empty())
        return load_toy_unet(o.weights_path);
    UNetGeometry geo;
    geo.channels = channels;
    return make_toy_unet(geo, kDefaultWeightsSeed);
}

int run_edit(const CommonOpts& o, const std::string& in, const std::string& out,
             const std::string& src, const std::string& tar,
             const std::string& record_path) {
    EditConfig cfg = resolve_config(o);
    if (o.print_config) {
        print_config(cfg, std::cout);
        return 0;
    }
    if (in.empty() || out.empty())
        throw CLI::ValidationError("edit requires --in and --out");
    set_num_threads(o.threads);

    VideoFormat format = VideoFormat::stv1;
    VideoVolume video = load_video(in, &format);
    DenoiserHandle d = resolve_denoiser(o, video.channels);

    SampleStats stats;
    InversionRecord record;
    VideoVolume edited = edit(video, src, tar, cfg, d, &stats,
                              record_path.empty() ? nullptr : &record);
    std::cerr << "edit: " << stats.executed_steps << " sampling steps, "
              << stats.injected_steps << " with injection\n";
    if (!record_path.empty())
        save_record(record, record_path);
    save_video(edited, out, format);
    return 0;
}

int run_invert(const CommonOpts& o, const std::string& in, const std::string& src,
               const std::string& record_path) {
    EditConfig cfg = resolve_config(o);
    if (o.print_config) {
        print_config(cfg, std::cout);
        return 0;
    }
    if (in.empty() || record_path.empty())
        throw CLI::ValidationError("invert requires --in and --save-record");
    set_num_threads(o.threads);

    VideoVolume video = load_video(in);
    VideoVolume latent = encode(video, cfg.codec);
    if (latent.n_frames != cfg.seg_len)
        throw std::invalid_argument("invert: input must have exactly seg_len = " +
                                    std::to_string(cfg.seg_len) +
                                    " frames (use `edit` for other lengths)");
    DenoiserHandle d = resolve_denoiser(o, latent.channels);
    InversionRecord rec = invert(latent, embed_prompt(src), cfg, d);
    save_record(rec, record_path);
    std::cerr << "invert: saved record (" << rec.noise_volumes.size() << " tensors, checksum "
              << std::hex << rec.checksum() << std::dec << ")\n";
    return 0;
}

int run_metrics(const std::string& src_path, const std::string& edit_path, int threads) {
    set_num_threads(threads);
    VideoVolume src = load_video(src_path);
    VideoVolume edited = load_video(edit_path);
    const double ferr = flow_error(src, edited);
    const double cons = embed_consistency(edited, make_projection_embedder(7));
    std::printf("%.6f,%.6f\n", ferr, cons);
    return 0;
}

int run_experiment(const std::string& out_dir, int samples, uint64_t seed, int threads) {
    set_num_threads(threads);
    DefaultExperiment ex = make_default_experiment(seed);
    ExperimentOptions opt;
    opt.n_samples = samples;
    opt.seed = seed;
    MseReport report = slice_mse_experiment(ex.videos, ex.denoiser, opt);
    std::filesystem::create_directories(out_dir);
    const std::string path = out_dir + "/mse_report.csv";
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("experiment: cannot write " + path);
    report.write_csv(out);
    std::cerr << "experiment: wrote " << path << "\n";
    return 0;
}

/*------------------------------ selfcheck ------------------------------*/

bool check(const char* name, bool ok) {
    std::printf("%s %s\n", ok ? "PASS" : "FAIL", name);
    return ok;
}

int run_selfcheck(int threads) {
    set_num_threads(threads);
    bool all = true;

    // exact reconstruction at desk scale: invert then sample with the same
    // prompt, no skip, full injection
    {
        EditConfig cfg;
        cfg.T = 8;
        cfg.T_skip = 0;
        cfg.inject_fraction = 1.0;
        cfg.seg_len = 8;
        cfg.seed = 11;
        UNetGeometry geo;
        geo.channels = 2;
        DenoiserHandle d = make_toy_unet(geo, 5);
        VideoVolume vol(8, 8, 8, 2, Space::latent);
        Rng rng(3);
        for (auto& v : vol.data)
            v = 0.5f * rng.normal_f();
        PromptEmbedding p = embed_prompt("a scene");
        InversionRecord rec = invert(vol, p, cfg, d);
        VideoVolume back = sample(rec, p, cfg, d);
        float err = 0.0f;
        for (size_t i = 0; i < vol.size(); ++i)
            err = std::max(err, std::abs(back.data[i] - vol.data[i]));
        all &= check("reconstruction (invert->sample identity)", err < 1e-3f);
    }

    // Eq-1 combination preserves unit variance
    {
        const size_t n = 200000;
        VideoVolume a(1, 500, 400, 1, Space::latent), b(1, 500, 400, 1, Space::latent);
        Rng rng(17);
        for (size_t i = 0; i < n; ++i) {
            a.data[i] = rng.normal_f();
            b.data[i] = rng.normal_f();
        }
        VideoVolume c = combine_predictions(a, b, 0.8);
        double mean = 0.0, sq = 0.0;
        for (float v : c.data) {
            mean += v;
            sq += static_cast<double>(v) * v;
        }
        mean /= n;
        const double var = sq / n - mean * mean;
        all &= check("variance preservation (sqrt-gamma combination)",
                     std::abs(var - 1.0) < 0.02);
    }

    // extended attention over {self} equals self-attention
    {
        Rng rng(23);
        bool ok = true;
        for (int trial = 0; trial < 20 && ok; ++trial) {
            Mat tok(12, 16);
            for (auto& v : tok.v)
                v = rng.normal_f();
            AttentionWeights w;
            w.w_q = Mat(16, 16);
            w.w_k = Mat(16, 16);
            w.w_v = Mat(16, 16);
            for (auto* m : {&w.w_q, &w.w_k, &w.w_v})
                for (auto& v : m->v)
                    v = 0.3f * rng.normal_f();
            AttentionTensors at;
            at.q = project_tokens(tok, w.w_q);
            at.k = project_tokens(tok, w.w_k);
            at.v = project_tokens(tok, w.w_v);
            Mat a = self_attention(at);
            Mat b = extended_attention(tok, {&tok}, w);
            for (size_t i = 0; i < a.v.size(); ++i)
                ok &= std::abs(a.v[i] - b.v[i]) < 1e-6f;
        }
        all &= check("extended attention degenerates to self-attention", ok);
    }

    // schedule duality: mu_hat then extract_noise reproduces x_{tau-1}
    {
        NoiseSchedule s = make_schedule(10);
        Rng rng(29);
        bool ok = true;
        for (int tau = 1; tau <= 10; ++tau) {
            std::vector<float> x(64), eps(64), mu(64), z(64), back(64);
            for (auto& v : x)
                v = rng.normal_f();
            for (auto& v : eps)
                v = rng.normal_f();
            std::vector<float> xprev(64);
            for (auto& v : xprev)
                v = rng.normal_f();
            mu_hat(x.data(), eps.data(), mu.data(), 64, tau, s);
            extract_noise(xprev.data(), mu.data(), z.data(), 64, tau, s);
            for (int i = 0; i < 64; ++i)
                back[i] = mu[i] + static_cast<float>(s.sigma[tau]) * z[i];
            for (int i = 0; i < 64; ++i)
                ok &= std::abs(back[i] - xprev[i]) < 1e-4f;
        }
        all &= check("mu_hat / extract_noise duality", ok);
    }

    return all ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"space-time volume video editing with diffusion inversion"};
    app.require_subcommand(0, 1);

    bool print_default_config = false;
    app.add_flag("--print-config", print_default_config, "print the default config and exit");

    CommonOpts edit_opts, invert_opts;
    std::string edit_in, edit_out, edit_src, edit_tar, edit_record;
    CLI::App* cmd_edit = app.add_subcommand("edit", "invert a video and regenerate it under "
                                                    "a target prompt");
    cmd_edit->add_option("--in", edit_in, "input video (frame dir or STV1 file)");
    cmd_edit->add_option("--out", edit_out, "output path (same format as input)");
    cmd_edit->add_option("--src", edit_src, "source prompt describing the input");
    cmd_edit->add_option("--tar", edit_tar, "target prompt describing the edit");
    cmd_edit->add_option("--save-record", edit_record, "also save the inversion record (STW1)");
    add_common(cmd_edit, edit_opts);

    std::string invert_in, invert_src, invert_record;
    CLI::App* cmd_invert = app.add_subcommand("invert", "extract the noise record for a video");
    cmd_invert->add_option("--in", invert_in, "input video (frame dir or STV1 file)");
    cmd_invert->add_option("--src", invert_src, "source prompt");
    cmd_invert->add_option("--save-record", invert_record, "record output path (STW1)");
    add_common(cmd_invert, invert_opts);

    std::string m_src, m_edit;
    int m_threads = 1;
    CLI::App* cmd_metrics = app.add_subcommand("metrics", "flow error and embedding "
                                                          "consistency of an edit");
    cmd_metrics->add_option("--in", m_src, "source video")->required();
    cmd_metrics->add_option("--edit", m_edit, "edited video")->required();
    cmd_metrics->add_option("--threads", m_threads, "worker threads (0 = auto)");

    std::string x_out = ".";
    int x_samples = 10000;
    int64_t x_seed = 1;
    int x_threads = 1;
    CLI::App* cmd_exp = app.add_subcommand("experiment", "denoiser MSE on frames, y-t slices "
                                                         "and permuted frames");
    cmd_exp->add_option("--out", x_out, "output directory for mse_report.csv");
    cmd_exp->add_option("--samples", x_samples, "samples per (noise level, kind)");
    cmd_exp->add_option("--seed", x_seed, "experiment seed");
    cmd_exp->add_option("--threads", x_threads, "worker threads (0 = auto)");

    int s_threads = 1;
    CLI::App* cmd_self = app.add_subcommand("selfcheck", "run the built-in invariant suite");
    cmd_self->add_option("--threads", s_threads, "worker threads (0 = auto)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0)
            return app.exit(e); // --help
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (print_default_config && app.get_subcommands().empty()) {
            print_config(EditConfig{}, std::cout);
            return 0;
        }
        if (cmd_edit->parsed())
            return run_edit(edit_opts, edit_in, edit_out, edit_src, edit_tar, edit_record);
        if (cmd_invert->parsed())
            return run_invert(invert_opts, invert_in, invert_src, invert_record);
        if (cmd_metrics->parsed())
            return run_metrics(m_src, m_edit, m_threads);
        if (cmd_exp->parsed())
            return run_experiment(x_out, x_samples, static_cast<uint64_t>(x_seed), x_threads);
        if (cmd_self->parsed())
            return run_selfcheck(s_threads);
        std::cerr << "usage error: no subcommand (try --help)\n";
        return 1;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
