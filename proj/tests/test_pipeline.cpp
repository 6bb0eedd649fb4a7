#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracle.hpp"
#include "stvedit/parallel.hpp"
#include "stvedit/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace stvedit;

namespace {

EditConfig tiny_config() {
    EditConfig cfg;
    cfg.T = 10;
    cfg.T_skip = 0;
    cfg.inject_fraction = 1.0;
    cfg.seg_len = 8;
    cfg.seed = 21;
    return cfg;
}

DenoiserHandle tiny_unet(int channels, uint64_t seed = 5) {
    UNetGeometry geo;
    geo.channels = channels;
    geo.base_width = 16;
    return make_toy_unet(geo, seed);
}

VideoVolume random_latent(int t, int h, int w, int c, uint64_t seed, float scale = 0.5f) {
    VideoVolume v(t, h, w, c, Space::latent);
    oracle::fill_normal(v.data, seed, scale);
    return v;
}

float max_abs(const VideoVolume& a, const VideoVolume& b) {
    REQUIRE(a.size() == b.size());
    return oracle::max_abs_diff(a.data, b.data);
}

} // namespace

TEST_CASE("record completeness: T noise volumes, all finite, terminal stored") {
    EditConfig cfg = tiny_config();
    DenoiserHandle d = tiny_unet(2);
    VideoVolume v = random_latent(8, 8, 8, 2, 1);
    InversionRecord rec = invert(v, embed_prompt("src"), cfg, d);
    REQUIRE(rec.noise_volumes.size() == static_cast<size_t>(cfg.T) + 1);
    for (int tau = 1; tau <= cfg.T; ++tau) {
        REQUIRE(rec.noise_volumes[tau].size() == v.size());
        for (float x : rec.noise_volumes[tau].data)
            CHECK(std::isfinite(x));
    }
    REQUIRE(rec.segments.size() == 1);
    CHECK(rec.segments[0].x_terminal.size() == v.size());
    CHECK(rec.segments[0].x_start.size() == v.size());
    CHECK(rec.segments[0].cache->entry_count() > 0);
}

TEST_CASE("reconstruction: invert then sample with the same prompt is the identity") {
    EditConfig cfg = tiny_config();
    DenoiserHandle d = tiny_unet(2);
    VideoVolume v = random_latent(8, 8, 8, 2, 2);
    PromptEmbedding p = embed_prompt("same");
    InversionRecord rec = invert(v, p, cfg, d);
    SampleStats stats;
    VideoVolume back = sample(rec, p, cfg, d, &stats);
    CHECK(stats.executed_steps == 10);
    CHECK(stats.injected_steps == 10);
    CHECK(max_abs(back, v) < 1e-3f);
}

TEST_CASE("reconstruction holds for the analytic denoiser too (denoiser-independent)") {
    EditConfig cfg = tiny_config();
    cfg.gamma = 0.5;
    // cube video: frames and y-t slices share the 8x8 geometry
    DenoiserHandle d = make_analytic(GaussianPrior::ar1_separable(8, 8, 0.6, 0.6));
    VideoVolume v = random_latent(8, 8, 8, 1, 3);
    PromptEmbedding p = embed_prompt("whatever");
    InversionRecord rec = invert(v, p, cfg, d);
    VideoVolume back = sample(rec, p, cfg, d);
    CHECK(max_abs(back, v) < 1e-3f);
}

TEST_CASE("same seed gives identical records, different seeds differ") {
    EditConfig cfg = tiny_config();
    DenoiserHandle d = tiny_unet(2);
    VideoVolume v = random_latent(8, 8, 8, 2, 4);
    PromptEmbedding p = embed_prompt("s");
    InversionRecord r1 = invert(v, p, cfg, d);
    InversionRecord r2 = invert(v, p, cfg, d);
    CHECK(r1.checksum() == r2.checksum());
    cfg.seed = 22;
    InversionRecord r3 = invert(v, p, cfg, d);
    CHECK(r1.checksum() != r3.checksum());
}

TEST_CASE("injection-step arithmetic: T=50, T_skip=8 runs 42 steps, 36 injected") {
    // count through the real sampler on a tiny volume
    EditConfig cfg;
    cfg.T = 50;
    cfg.T_skip = 8;
    cfg.inject_fraction = 0.85;
    cfg.seg_len = 2;
    cfg.gamma = 1.0; // frame branch only keeps this quick
    cfg.seed = 9;
    DenoiserHandle d = tiny_unet(1);
    VideoVolume v = random_latent(2, 8, 8, 1, 5);
    PromptEmbedding p = embed_prompt("a");
    InversionRecord rec = invert(v, p, cfg, d);
    SampleStats stats;
    sample(rec, p, cfg, d, &stats);
    CHECK(stats.executed_steps == 42);
    CHECK(stats.injected_steps == 36);
}

TEST_CASE("injection on/off changes the output under a different prompt") {
    EditConfig cfg = tiny_config();
    DenoiserHandle d = tiny_unet(2);
    VideoVolume v = random_latent(8, 8, 8, 2, 6);
    InversionRecord rec = invert(v, embed_prompt("a cat"), cfg, d);

    EditConfig with = cfg;
    with.inject_fraction = 1.0;
    EditConfig without = cfg;
    without.inject_fraction = 0.0;
    VideoVolume a = sample(rec, embed_prompt("a dog"), with, d);
    VideoVolume b = sample(rec, embed_prompt("a dog"), without, d);
    CHECK(max_abs(a, b) > 1e-6f);
}

TEST_CASE("sampling from a record without captures fails loudly when injecting") {
    EditConfig cfg = tiny_config();
    DenoiserHandle d = tiny_unet(2);
    VideoVolume v = random_latent(8, 8, 8, 2, 7);
    InversionRecord rec = invert(v, embed_prompt("p"), cfg, d);
    rec.segments[0].cache = std::make_shared<AttentionCache>(); // drop captures
    CHECK_THROWS_AS(sample(rec, embed_prompt("p"), cfg, d), std::runtime_error);
    // but disabling injection still samples
    EditConfig no_inject = cfg;
    no_inject.inject_fraction = 0.0;
    VideoVolume out = sample(rec, embed_prompt("p"), no_inject, d);
    CHECK(out.size() == v.size());
}

TEST_CASE("config snapshot mismatches are rejected") {
    EditConfig cfg = tiny_config();
    DenoiserHandle d = tiny_unet(2);
    VideoVolume v = random_latent(8, 8, 8, 2, 8);
    InversionRecord rec = invert(v, embed_prompt("p"), cfg, d);
    EditConfig other = cfg;
    other.T_skip = 2;
    CHECK_THROWS_AS(sample(rec, embed_prompt("p"), other, d), std::invalid_argument);
}

TEST_CASE("DDIM ablation: runs, deterministic, bit-identical across executions") {
    EditConfig cfg = tiny_config();
    cfg.eta = 0.0;
    DenoiserHandle d = tiny_unet(2);
    VideoVolume v = random_latent(8, 8, 8, 2, 9);
    PromptEmbedding ps = embed_prompt("src"), pt = embed_prompt("tar");

    InversionRecord r1 = invert(v, ps, cfg, d);
    CHECK(r1.noise_volumes.empty()); // no extractable noise without sigma
    VideoVolume o1 = sample(r1, pt, cfg, d);

    InversionRecord r2 = invert(v, ps, cfg, d);
    VideoVolume o2 = sample(r2, pt, cfg, d);
    CHECK(o1.data == o2.data); // bit identical

    // eta=0 forbids noise extraction through the schedule
    NoiseSchedule s = cfg.schedule();
    std::vector<float> a(4, 1.0f), b(4, 0.0f), z(4);
    CHECK_THROWS_AS(extract_noise(a.data(), b.data(), z.data(), 4, 3, s), std::domain_error);
}

TEST_CASE("interpolate_frames: midpoints, padding, exact subsample round trip") {
    VideoVolume v(3, 2, 2, 1, Space::pixel);
    for (int t = 0; t < 3; ++t)
        std::fill(v.frame(t), v.frame(t) + v.frame_size(), static_cast<float>(t) * 0.25f);
    VideoVolume up = interpolate_frames(v);
    REQUIRE(up.n_frames == 6);
    CHECK(up.at(0, 0, 0, 0) == 0.0f);
    CHECK(up.at(1, 0, 0, 0) == doctest::Approx(0.125f)); // midpoint
    CHECK(up.at(2, 0, 0, 0) == 0.25f);
    CHECK(up.at(3, 0, 0, 0) == doctest::Approx(0.375f));
    CHECK(up.at(4, 0, 0, 0) == 0.5f);
    CHECK(up.at(5, 0, 0, 0) == 0.5f); // repeated last frame

    VideoVolume back = subsample_even(up, 3);
    CHECK(back.data == v.data);

    VideoVolume two(2, 2, 2, 1, Space::pixel);
    std::fill(two.data.begin(), two.data.end(), 0.5f);
    VideoVolume up2 = interpolate_frames(two);
    for (float x : up2.data)
        CHECK(x == 0.5f); // identical frames stay identical

    VideoVolume one(1, 2, 2, 1, Space::pixel);
    CHECK_THROWS_AS(interpolate_frames(one), std::invalid_argument);
}

TEST_CASE("codecs: identity exact, pool2 averages and round trips constants") {
    VideoVolume v = random_latent(2, 4, 4, 3, 10, 0.3f);
    v.space = Space::pixel;
    for (auto& x : v.data)
        x = std::clamp(x, -1.0f, 1.0f);
    VideoVolume enc = encode(v, Codec::identity);
    CHECK(enc.space == Space::latent);
    VideoVolume dec = decode(enc, Codec::identity);
    CHECK(dec.data == v.data);

    VideoVolume c(1, 4, 4, 1, Space::pixel);
    std::fill(c.data.begin(), c.data.end(), 0.25f);
    VideoVolume enc2 = encode(c, Codec::pool2);
    CHECK(enc2.height == 2);
    CHECK(enc2.width == 2);
    for (float x : enc2.data)
        CHECK(x == 0.25f);
    VideoVolume dec2 = decode(enc2, Codec::pool2);
    CHECK(dec2.data == c.data);

    // checkerboard pools to its mean plane (zero)
    VideoVolume cb(1, 4, 4, 1, Space::pixel);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            cb.at(0, y, x, 0) = ((x + y) % 2 == 0) ? 1.0f : -1.0f;
    VideoVolume enc3 = encode(cb, Codec::pool2);
    for (float x : enc3.data)
        CHECK(x == 0.0f);

    VideoVolume odd(1, 5, 4, 1, Space::pixel);
    CHECK_THROWS_AS(encode(odd, Codec::pool2), std::invalid_argument);
}

TEST_CASE("edit_plan: direct, interpolated and segmented paths") {
    EditConfig cfg; // seg_len 64
    CHECK(edit_plan(64, cfg).segments.size() == 1);

    SegmentPlan p40 = edit_plan(40, cfg); // doubled to 80 first
    REQUIRE(p40.segments.size() == 2);
    CHECK(p40.n_frames == 80);

    SegmentPlan p96 = edit_plan(96, cfg);
    REQUIRE(p96.segments.size() == 2);
    CHECK(p96.segments[0].start == 0);
    CHECK(p96.segments[0].length == 64);
    CHECK(p96.segments[1].start == 32);
    CHECK(p96.segments[1].length == 64);

    CHECK_THROWS_AS(edit_plan(32, cfg), std::invalid_argument);
}

TEST_CASE("edit: single-segment path preserves geometry and reconstructs") {
    EditConfig cfg = tiny_config();
    DenoiserHandle d = tiny_unet(1);
    VideoVolume v(8, 8, 8, 1, Space::pixel);
    oracle::fill_normal(v.data, 11, 0.3f);
    for (auto& x : v.data)
        x = std::clamp(x, -1.0f, 1.0f);

    SampleStats stats;
    VideoVolume out = edit(v, "same", "same", cfg, d, &stats);
    CHECK(out.n_frames == 8);
    CHECK(out.height == 8);
    CHECK(out.width == 8);
    CHECK(stats.executed_steps == 10);
    CHECK(max_abs(out, v) < 1e-3f);
}

TEST_CASE("edit: short input is interpolated, edited and subsampled back") {
    EditConfig cfg = tiny_config();
    cfg.T = 4;
    DenoiserHandle d = tiny_unet(1);
    VideoVolume v(5, 8, 8, 1, Space::pixel); // 5 < seg_len 8, > 4
    oracle::fill_normal(v.data, 12, 0.3f);
    for (auto& x : v.data)
        x = std::clamp(x, -1.0f, 1.0f);
    VideoVolume out = edit(v, "a", "b", cfg, d);
    CHECK(out.n_frames == 5); // back to the input frame count
    CHECK(out.height == 8);

    VideoVolume tiny(4, 8, 8, 1, Space::pixel); // 4 <= seg_len/2: too short
    CHECK_THROWS_AS(edit(tiny, "a", "b", cfg, d), std::invalid_argument);
}

TEST_CASE("edit: multi-segment path blends per step and reconstructs") {
    EditConfig cfg = tiny_config();
    cfg.T = 6;
    DenoiserHandle d = tiny_unet(1);
    VideoVolume v(12, 8, 8, 1, Space::pixel); // two segments: (0,8), (4,8)
    oracle::fill_normal(v.data, 13, 0.3f);
    for (auto& x : v.data)
        x = std::clamp(x, -1.0f, 1.0f);

    SegmentPlan plan = edit_plan(12, cfg);
    REQUIRE(plan.segments.size() == 2);
    CHECK(plan.segments[0].start == 0);
    CHECK(plan.segments[1].start == 4);

    VideoVolume out = edit(v, "x", "x", cfg, d);
    CHECK(out.n_frames == 12);
    // blended overlaps mix the two segments' independently-noised
    // trajectories (variance-preserving weights), and key-frames/slices
    // couple whole segments, so multi-segment reconstruction is only
    // approximate; it must stay bounded and finite
    CHECK(max_abs(out, v) < 1.0f);

    VideoVolume out2 = edit(v, "x", "x", cfg, d);
    CHECK(out.data == out2.data);
}

TEST_CASE("edit is deterministic end to end, independent of the thread count") {
    EditConfig cfg = tiny_config();
    cfg.T = 5;
    DenoiserHandle d = tiny_unet(1);
    VideoVolume v(8, 8, 8, 1, Space::pixel);
    oracle::fill_normal(v.data, 14, 0.3f);
    for (auto& x : v.data)
        x = std::clamp(x, -1.0f, 1.0f);
    VideoVolume a = edit(v, "p", "q", cfg, d);
    VideoVolume b = edit(v, "p", "q", cfg, d);
    CHECK(a.data == b.data);

    set_num_threads(3); // work items write disjoint data, so bits must match
    VideoVolume c = edit(v, "p", "q", cfg, d);
    set_num_threads(1);
    CHECK(a.data == c.data);
}

TEST_CASE("config: file parsing, precedence, unknown keys") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "stvedit_cfg.txt").string();
    {
        std::ofstream out(path);
        out << "# comment line\n";
        out << "T = 20\n";
        out << "gamma = 0.5\n";
        out << "codec = pool2\n";
        out << "\n";
    }
    EditConfig cfg = load_config(path);
    CHECK(cfg.T == 20);
    CHECK(cfg.gamma == 0.5);
    CHECK(cfg.codec == Codec::pool2);
    CHECK(cfg.T_skip == 8); // untouched default

    apply_override(cfg, "T", "30"); // CLI override beats the file
    CHECK(cfg.T == 30);

    CHECK_THROWS_AS(apply_override(cfg, "no_such_key", "1"), std::invalid_argument);
    CHECK_THROWS_AS(apply_override(cfg, "T", "abc"), std::invalid_argument);
    CHECK_THROWS_AS(apply_override(cfg, "codec", "mp4"), std::invalid_argument);
    {
        std::ofstream out(path);
        out << "bogus = 1\n";
    }
    CHECK_THROWS_AS(load_config(path), std::invalid_argument);
    fs::remove(path);
}

TEST_CASE("print_config emits the section-5.1 defaults") {
    std::ostringstream out;
    print_config(EditConfig{}, out);
    const std::string s = out.str();
    CHECK(s.find("T = 50\n") != std::string::npos);
    CHECK(s.find("T_skip = 8\n") != std::string::npos);
    CHECK(s.find("gamma = 0.8\n") != std::string::npos);
    CHECK(s.find("inject_fraction = 0.85\n") != std::string::npos);
    CHECK(s.find("cfg_strength_EA = 10\n") != std::string::npos);
    CHECK(s.find("cfg_strength_S = 1\n") != std::string::npos);
    CHECK(s.find("seg_len = 64\n") != std::string::npos);
}

TEST_CASE("config validation rejects out-of-range values") {
    EditConfig cfg;
    cfg.T_skip = 50;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = EditConfig{};
    cfg.gamma = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = EditConfig{};
    cfg.inject_fraction = -0.1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("record save/load round trip (minus the attention cache)") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "stvedit_rec.stw1").string();
    EditConfig cfg = tiny_config();
    cfg.T = 4;
    DenoiserHandle d = tiny_unet(2);
    VideoVolume v = random_latent(8, 8, 8, 2, 15);
    PromptEmbedding p = embed_prompt("p");
    InversionRecord rec = invert(v, p, cfg, d);
    save_record(rec, path);
    InversionRecord back = load_record(path);
    CHECK(back.config.T == cfg.T);
    CHECK(back.config.seg_len == cfg.seg_len);
    CHECK(back.plan.segments.size() == rec.plan.segments.size());
    CHECK(back.checksum() == rec.checksum());

    // loaded records sample when injection is off (cache is not serialized)
    EditConfig no_inject = cfg;
    no_inject.inject_fraction = 0.0;
    VideoVolume out = sample(back, p, no_inject, d);
    CHECK(out.size() == v.size());
    fs::remove(path);
}

TEST_CASE("invert rejects wrong frame counts and eta outside the pre") {
    EditConfig cfg = tiny_config();
    DenoiserHandle d = tiny_unet(1);
    VideoVolume v = random_latent(6, 8, 8, 1, 16);
    CHECK_THROWS_AS(invert(v, embed_prompt(""), cfg, d), std::invalid_argument);
}
