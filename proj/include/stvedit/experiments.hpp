#pragma once

#include "stvedit/denoisers.hpp"
#include "stvedit/stvolume.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace stvedit {

// Denoiser MSE on frames vs y-t slices vs pixel-permuted frames across noise
// levels.
enum class InputKind { frame, yt_slice, permuted };
const char* input_kind_name(InputKind k);

struct MseRow {
    double alpha_bar = 0.0;
    InputKind kind = InputKind::frame;
    double mse = 0.0;
    int sample_count = 0;
};

struct MseReport {
    std::vector<MseRow> rows;

    double at(double alpha_bar, InputKind kind) const; // throws if absent
    void write_csv(std::ostream& out) const;           // alpha_bar,kind,mse,n
};

// Synthetic stand-in corpus: separable AR(1) Gaussian videos (unit marginal
// variance), temporal correlation rho_t, spatial rho_s, one channel.
std::vector<VideoVolume> make_ar1_videos(int count, int n_frames, int height, int width,
                                         double rho_t, double rho_s, uint64_t seed);

struct ExperimentOptions {
    std::vector<double> alphas; // noise levels; empty = 10 evenly spaced taus
                                // of the default 50-step schedule
    int n_samples = 10000;
    uint64_t seed = 1;
};

// For each noise level and input kind: draw an input plane from the corpus,
// noise it, predict with the denoiser, accumulate |eps_hat - eps|^2 / dim.
// Sampling is seed-deterministic and embarrassingly parallel.
MseReport slice_mse_experiment(const std::vector<VideoVolume>& videos,
                               const DenoiserHandle& denoiser,
                               const ExperimentOptions& opt);

// Default desk-scale setup: 24 AR(1) videos of 16x16x16, rho_t = 0.95,
// rho_s = 0.9, analytic denoiser matched to the frame statistics.
struct DefaultExperiment {
    std::vector<VideoVolume> videos;
    DenoiserHandle denoiser;
};
DefaultExperiment make_default_experiment(uint64_t seed);

} // namespace stvedit
