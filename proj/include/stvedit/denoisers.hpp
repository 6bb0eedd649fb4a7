#pragma once

#include "stvedit/attention.hpp"
#include "stvedit/mat.hpp"
#include "stvedit/rng.hpp"
#include "stvedit/schedule.hpp"
#include "stvedit/stvolume.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace stvedit {

// ------------------------------ prompts ------------------------------

// Deterministic stand-in for a text encoder: 8 tokens of dim 64 derived from
// a hash of (text, position). The empty string gives all-zero tokens and is
// treated as the unconditional branch.
struct PromptEmbedding {
    Mat tokens; // (8, 64)
    std::string source_text;

    bool is_null() const { return source_text.empty(); }
};

constexpr int kPromptTokens = 8;
constexpr int kPromptDim = 64;

PromptEmbedding embed_prompt(const std::string& text);

// ------------------------------ gaussian prior ------------------------------

// Dense SPD covariance over flattened slice/frame coordinates; the
// verification oracle's model of clean data.
struct GaussianPrior {
    int dim = 0;
    std::vector<double> cov;  // row-major (dim, dim)
    std::vector<double> chol; // lower Cholesky of cov; factories fill it,
                              // sample_prior refactors when empty

    double at(int r, int c) const { return cov[static_cast<size_t>(r) * dim + c]; }

    static GaussianPrior identity(int dim);
    // cov[i][j] = rho^|i-j|
    static GaussianPrior ar1_chain(int dim, double rho);
    // separable AR(1) over a (rows, cols) grid flattened row-major:
    // cov = ar1(rows, rho_rows) (x) ar1(cols, rho_cols)
    static GaussianPrior ar1_separable(int rows, int cols, double rho_rows, double rho_cols);
};

// x0 ~ N(0, cov) via Cholesky; throws std::invalid_argument if cov is not SPD.
std::vector<float> sample_prior(const GaussianPrior& prior, Rng& rng);

// Exact conditional mean E[eps | x_tau = x] for x0 ~ N(0, cov):
// eps_hat = sqrt(1-abar) * (abar*cov + (1-abar)*I)^-1 * x.
std::vector<float> analytic_mmse(const GaussianPrior& prior, const std::vector<float>& x,
                                 int tau, const NoiseSchedule& sched);

// Expected per-coordinate MSE of the estimator above on its own prior:
// trace(I - (1-abar) * C^-1) / dim.
double analytic_expected_mse(const GaussianPrior& prior, double abar);

// ------------------------------ denoiser handles ------------------------------

struct UNetGeometry {
    int channels = 4;    // input/output channels
    int base_width = 32; // channel count at full resolution (doubles once)
};

// Attention site ids inside the toy U-Net.
enum UNetLayer : int {
    kAttnMid = 0,
    kAttnUp1 = 1,
    kAttnUp0 = 2,
};
inline std::vector<int> unet_upsample_attn_layers() { return {kAttnUp1, kAttnUp0}; }

class UNet;                 // internal
struct AnalyticFactorCache; // internal memo of per-noise-level factorizations

// Pluggable noise predictor eps(x, tau, p). Logically immutable after
// construction; prediction calls are re-entrant (the factor memo is
// internally synchronized).
struct DenoiserHandle {
    enum class Kind { analytic, toy_unet };

    Kind kind = Kind::analytic;
    std::shared_ptr<const GaussianPrior> prior;     // analytic
    std::shared_ptr<AnalyticFactorCache> factors;   // analytic
    std::shared_ptr<const UNet> net;                // toy_unet

    int channels() const;
};

DenoiserHandle make_analytic(GaussianPrior prior);

// Untrained network, seeded Gaussian weights (scale 0.02), GN gammas near 1.
// Geometry must divide by 4 (two 2x downsamplings) at forward time.
DenoiserHandle make_toy_unet(const UNetGeometry& geo, uint64_t seed);

void save_toy_unet(const DenoiserHandle& d, const std::string& path); // STW1
DenoiserHandle load_toy_unet(const std::string& path);
uint64_t toy_unet_checksum(const DenoiserHandle& d);

// Single-input prediction; the network attends to the frame itself only.
// Deterministic given (d, x, tau, p). Throws std::invalid_argument on
// geometry mismatch with the handle.
Slice2D predict_noise(const DenoiserHandle& d, const Slice2D& x, int tau,
                      const NoiseSchedule& sched, const PromptEmbedding& p);

// Batched forward over frames that can see each other through extended
// attention. context[i] lists batch indices concatenated for K/V of item i
// (include i itself for self-attention). frame_labels key the attention
// cache; control routes capture/injection. Analytic handles ignore context
// and control.
std::vector<Slice2D> predict_noise_batch(const DenoiserHandle& d,
                                         const std::vector<const Slice2D*>& xs,
                                         int tau, const NoiseSchedule& sched,
                                         const PromptEmbedding& p,
                                         const std::vector<std::vector<int>>& context,
                                         const std::vector<int>& frame_labels,
                                         const AttentionControl* control);

// ------------------------------ guidance ------------------------------

// eps_uncond + s * (eps_cond - eps_uncond)
void cfg(const float* eps_cond, const float* eps_uncond, float* out, size_t n, double s);
Slice2D cfg(const Slice2D& eps_cond, const Slice2D& eps_uncond, double s);

} // namespace stvedit
