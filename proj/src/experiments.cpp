#include "stvedit/experiments.hpp"

#include "stvedit/parallel.hpp"
#include "stvedit/rng.hpp"
#include "stvedit/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace stvedit {

const char* input_kind_name(InputKind k) {
    switch (k) {
        case InputKind::frame: return "frame";
        case InputKind::yt_slice: return "yt_slice";
        case InputKind::permuted: return "permuted";
    }
    return "?";
}

double MseReport::at(double alpha_bar, InputKind kind) const {
    for (const MseRow& r : rows)
        if (r.kind == kind && std::abs(r.alpha_bar - alpha_bar) < 1e-12)
            return r.mse;
    throw std::invalid_argument("MseReport: no row for requested alpha_bar/kind");
}

void MseReport::write_csv(std::ostream& out) const {
    out << "alpha_bar,kind,mse,n\n";
    for (const MseRow& r : rows)
        out << r.alpha_bar << "," << input_kind_name(r.kind) << "," << r.mse << "," <<
            r.sample_count << "\n";
}

std::vector<VideoVolume> make_ar1_videos(int count, int n_frames, int height, int width,
                                         double rho_t, double rho_s, uint64_t seed) {
    if (std::abs(rho_t) >= 1.0 || std::abs(rho_s) >= 1.0)
        throw std::invalid_argument("make_ar1_videos: |rho| must be < 1");
    std::vector<VideoVolume> out;
    out.reserve(count);
    const double st = std::sqrt(1.0 - rho_t * rho_t);
    const double ss = std::sqrt(1.0 - rho_s * rho_s);
    for (int v = 0; v < count; ++v) {
        Rng rng(mix_seed(seed, 0xA21Dull, static_cast<uint64_t>(v)));
        VideoVolume vol(n_frames, height, width, 1, Space::latent);
        // white noise, then the stationary AR(1) recursion along x, y, t in
        // turn; the result has the separable Kronecker covariance with unit
        // marginal variance
        for (auto& x : vol.data)
            x = rng.normal_f();
        for (int t = 0; t < n_frames; ++t) {
            for (int y = 0; y < height; ++y)
                for (int x = 1; x < width; ++x)
                    vol.at(t, y, x, 0) = static_cast<float>(
                        rho_s * vol.at(t, y, x - 1, 0) + ss * vol.at(t, y, x, 0));
            for (int y = 1; y < height; ++y)
                for (int x = 0; x < width; ++x)
                    vol.at(t, y, x, 0) = static_cast<float>(
                        rho_s * vol.at(t, y - 1, x, 0) + ss * vol.at(t, y, x, 0));
        }
        for (int t = 1; t < n_frames; ++t)
            for (int y = 0; y < height; ++y)
                for (int x = 0; x < width; ++x)
                    vol.at(t, y, x, 0) = static_cast<float>(
                        rho_t * vol.at(t - 1, y, x, 0) + st * vol.at(t, y, x, 0));
        out.push_back(std::move(vol));
    }
    return out;
}

namespace {

std::vector<double> default_alpha_grid() {
    const NoiseSchedule s = make_schedule(50);
    std::vector<double> alphas;
    for (int i = 0; i < 10; ++i) {
        const int tau = 1 + static_cast<int>(std::llround(i * 49.0 / 9.0));
        alphas.push_back(s.alpha_bar[tau]);
    }
    return alphas;
}

} // namespace

MseReport slice_mse_experiment(const std::vector<VideoVolume>& videos,
                               const DenoiserHandle& denoiser,
                               const ExperimentOptions& opt) {
    if (videos.empty())
        throw std::invalid_argument("slice_mse_experiment: no videos");
    if (opt.n_samples < 1)
        throw std::invalid_argument("slice_mse_experiment: n_samples must be >= 1");
    for (const auto& v : videos)
        if (v.space != Space::latent)
            throw std::invalid_argument("slice_mse_experiment: videos must be in latent space");

    std::vector<double> alphas = opt.alphas.empty() ? default_alpha_grid() : opt.alphas;
    // one schedule whose alpha_bar sequence hits the requested levels:
    // beta_tau = 1 - abar_tau / abar_{tau-1} over the descending grid
    std::vector<double> sorted = alphas;
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    NoiseSchedule sched;
    sched.T = static_cast<int>(sorted.size());
    sched.eta = 1.0;
    sched.beta.assign(sched.T + 1, 0.0);
    sched.alpha.assign(sched.T + 1, 0.0);
    sched.alpha_bar.assign(sched.T + 1, 0.0);
    sched.sigma.assign(sched.T + 1, 0.0);
    sched.alpha_bar[0] = 1.0;
    for (int tau = 1; tau <= sched.T; ++tau) {
        if (sorted[tau - 1] <= 0.0 || sorted[tau - 1] >= 1.0)
            throw std::invalid_argument("slice_mse_experiment: alpha levels must lie in (0,1)");
        sched.alpha_bar[tau] = sorted[tau - 1];
        sched.alpha[tau] = sched.alpha_bar[tau] / sched.alpha_bar[tau - 1];
        sched.beta[tau] = 1.0 - sched.alpha[tau];
    }

    const std::array<InputKind, 3> kinds{InputKind::frame, InputKind::yt_slice,
                                         InputKind::permuted};
    MseReport report;
    for (int tau = 1; tau <= sched.T; ++tau) {
        for (InputKind kind : kinds) {
            std::vector<double> errs(opt.n_samples, 0.0);
            parallel_for(opt.n_samples, [&](int i) {
                Rng rng(mix_seed(opt.seed, static_cast<uint64_t>(tau) * 31 +
                                                static_cast<uint64_t>(kind),
                                 static_cast<uint64_t>(i)));
                const VideoVolume& vid = videos[rng.below(videos.size())];
                Slice2D plane;
                switch (kind) {
                    case InputKind::frame:
                        plane = slice(vid, SliceAxis::XY, static_cast<int>(rng.below(vid.n_frames)));
                        break;
                    case InputKind::yt_slice:
                        plane = slice(vid, SliceAxis::YT, static_cast<int>(rng.below(vid.width)));
                        break;
                    case InputKind::permuted: {
                        Slice2D f = slice(vid, SliceAxis::XY,
                                          static_cast<int>(rng.below(vid.n_frames)));
                        plane = permute_pixels(f, rng.next_u64());
                        break;
                    }
                }
                const size_t dim = plane.data.size();
                std::vector<float> eps(dim);
                for (auto& e : eps)
                    e = rng.normal_f();
                Slice2D noisy(plane.rows, plane.cols, plane.channels, plane.axis, plane.index);
                forward_noise(plane.data.data(), eps.data(), noisy.data.data(), dim, tau, sched);
                Slice2D pred = predict_noise(denoiser, noisy, tau, sched,
                                             embed_prompt(""));
                double s = 0.0;
                for (size_t j = 0; j < dim; ++j) {
                    const double d = static_cast<double>(pred.data[j]) - eps[j];
                    s += d * d;
                }
                errs[i] = s / static_cast<double>(dim);
            });
            double mean = 0.0;
            for (double e : errs)
                mean += e;
            mean /= opt.n_samples;
            report.rows.push_back({sched.alpha_bar[tau], kind, mean, opt.n_samples});
        }
    }
    return report;
}

DefaultExperiment make_default_experiment(uint64_t seed) {
    DefaultExperiment e;
    e.videos = make_ar1_videos(24, 16, 16, 16, 0.95, 0.9, seed);
    e.denoiser = make_analytic(GaussianPrior::ar1_separable(16, 16, 0.9, 0.9));
    return e;
}

} // namespace stvedit
