#include "stvedit/denoisers.hpp"

#include "stvedit/kernels.hpp"
#include "unet_internal.hpp"

#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>

namespace stvedit {

/*================================ prompts ================================*/

PromptEmbedding embed_prompt(const std::string& text) {
    PromptEmbedding p;
    p.source_text = text;
    p.tokens = Mat(kPromptTokens, kPromptDim);
    if (text.empty())
        return p; // canonical null embedding: all zeros
    const uint64_t h = fnv1a(text);
    for (int i = 0; i < kPromptTokens; ++i) {
        Rng rng(mix_seed(h, static_cast<uint64_t>(i)));
        for (int j = 0; j < kPromptDim; ++j)
            p.tokens.at(i, j) = rng.normal_f();
    }
    return p;
}

/*================================ gaussian prior ================================*/

namespace {
std::vector<double> cholesky(const std::vector<double>& m, int n, const char* who);
}

GaussianPrior GaussianPrior::identity(int dim) {
    GaussianPrior g;
    g.dim = dim;
    g.cov.assign(static_cast<size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i)
        g.cov[static_cast<size_t>(i) * dim + i] = 1.0;
    g.chol = g.cov;
    return g;
}

GaussianPrior GaussianPrior::ar1_chain(int dim, double rho) {
    if (std::abs(rho) >= 1.0)
        throw std::invalid_argument("ar1_chain: |rho| must be < 1");
    GaussianPrior g;
    g.dim = dim;
    g.cov.resize(static_cast<size_t>(dim) * dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
            g.cov[static_cast<size_t>(i) * dim + j] = std::pow(rho, std::abs(i - j));
    g.chol = cholesky(g.cov, dim, "ar1_chain");
    return g;
}

GaussianPrior GaussianPrior::ar1_separable(int rows, int cols, double rho_rows,
                                           double rho_cols) {
    GaussianPrior a = ar1_chain(rows, rho_rows);
    GaussianPrior b = ar1_chain(cols, rho_cols);
    GaussianPrior g;
    g.dim = rows * cols;
    g.cov.resize(static_cast<size_t>(g.dim) * g.dim);
    for (int i = 0; i < g.dim; ++i) {
        const int ir = i / cols, ic = i % cols;
        for (int j = 0; j < g.dim; ++j) {
            const int jr = j / cols, jc = j % cols;
            g.cov[static_cast<size_t>(i) * g.dim + j] = a.at(ir, jr) * b.at(ic, jc);
        }
    }
    g.chol = cholesky(g.cov, g.dim, "ar1_separable");
    return g;
}

namespace {

// Lower-triangular Cholesky of a dense SPD matrix (doubles throughout).
std::vector<double> cholesky(const std::vector<double>& m, int n, const char* who) {
    std::vector<double> L(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = m[static_cast<size_t>(i) * n + j];
            for (int k = 0; k < j; ++k)
                s -= L[static_cast<size_t>(i) * n + k] * L[static_cast<size_t>(j) * n + k];
            if (i == j) {
                if (s <= 0.0)
                    throw std::invalid_argument(std::string(who) +
                                                ": matrix is not positive definite");
                L[static_cast<size_t>(i) * n + i] = std::sqrt(s);
            } else {
                L[static_cast<size_t>(i) * n + j] = s / L[static_cast<size_t>(j) * n + j];
            }
        }
    }
    return L;
}

// Solve (L L^T) x = b in place.
void cholesky_solve(const std::vector<double>& L, int n, std::vector<double>& b) {
    for (int i = 0; i < n; ++i) {
        double s = b[i];
        for (int k = 0; k < i; ++k)
            s -= L[static_cast<size_t>(i) * n + k] * b[k];
        b[i] = s / L[static_cast<size_t>(i) * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int k = i + 1; k < n; ++k)
            s -= L[static_cast<size_t>(k) * n + i] * b[k];
        b[i] = s / L[static_cast<size_t>(i) * n + i];
    }
}

std::vector<double> posterior_matrix(const GaussianPrior& prior, double abar) {
    const int n = prior.dim;
    std::vector<double> C(prior.cov.size());
    for (size_t i = 0; i < C.size(); ++i)
        C[i] = abar * prior.cov[i];
    for (int i = 0; i < n; ++i)
        C[static_cast<size_t>(i) * n + i] += 1.0 - abar;
    return C;
}

} // namespace

// Per-handle memo so repeated predictions at one noise level factor C once.
struct AnalyticFactorCache {
    std::map<int64_t, std::shared_ptr<const std::vector<double>>> by_abar_bits;
    std::mutex mu;

    std::shared_ptr<const std::vector<double>> factor(const GaussianPrior& prior,
                                                      double abar) {
        int64_t bits;
        static_assert(sizeof(bits) == sizeof(abar));
        std::memcpy(&bits, &abar, sizeof(bits));
        {
            std::lock_guard lock(mu);
            auto it = by_abar_bits.find(bits);
            if (it != by_abar_bits.end())
                return it->second;
        }
        auto L = std::make_shared<const std::vector<double>>(
            cholesky(posterior_matrix(prior, abar), prior.dim, "analytic_mmse"));
        std::lock_guard lock(mu);
        by_abar_bits.emplace(bits, L);
        return L;
    }
};

namespace {

std::vector<float> analytic_predict(const GaussianPrior& prior, const float* x, size_t n,
                                    double abar, AnalyticFactorCache* cache) {
    if (static_cast<int>(n) != prior.dim)
        throw std::invalid_argument("analytic denoiser: input dim " + std::to_string(n) +
                                    " != prior dim " + std::to_string(prior.dim));
    std::shared_ptr<const std::vector<double>> L;
    if (cache)
        L = cache->factor(prior, abar);
    else
        L = std::make_shared<const std::vector<double>>(
            cholesky(posterior_matrix(prior, abar), prior.dim, "analytic_mmse"));
    std::vector<double> b(n);
    for (size_t i = 0; i < n; ++i)
        b[i] = static_cast<double>(x[i]);
    cholesky_solve(*L, prior.dim, b);
    const double s = std::sqrt(1.0 - abar);
    std::vector<float> out(n);
    for (size_t i = 0; i < n; ++i)
        out[i] = static_cast<float>(s * b[i]);
    return out;
}

} // namespace

std::vector<float> sample_prior(const GaussianPrior& prior, Rng& rng) {
    const int n = prior.dim;
    const std::vector<double>* L = &prior.chol;
    std::vector<double> fresh;
    if (prior.chol.empty()) {
        fresh = cholesky(prior.cov, n, "sample_prior");
        L = &fresh;
    }
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i)
        w[i] = rng.normal();
    std::vector<float> x(n, 0.0f);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int k = 0; k <= i; ++k)
            s += (*L)[static_cast<size_t>(i) * n + k] * w[k];
        x[i] = static_cast<float>(s);
    }
    return x;
}

std::vector<float> analytic_mmse(const GaussianPrior& prior, const std::vector<float>& x,
                                 int tau, const NoiseSchedule& sched) {
    if (tau < 1 || tau > sched.T)
        throw std::invalid_argument("analytic_mmse: tau out of range");
    return analytic_predict(prior, x.data(), x.size(), sched.alpha_bar[tau], nullptr);
}

double analytic_expected_mse(const GaussianPrior& prior, double abar) {
    const int n = prior.dim;
    const auto L = cholesky(posterior_matrix(prior, abar), n, "analytic_expected_mse");
    // trace(C^-1) by solving against unit vectors
    double trace_inv = 0.0;
    std::vector<double> e(n);
    for (int j = 0; j < n; ++j) {
        std::fill(e.begin(), e.end(), 0.0);
        e[j] = 1.0;
        cholesky_solve(L, n, e);
        trace_inv += e[j];
    }
    return (n - (1.0 - abar) * trace_inv) / n;
}

/*================================ handles ================================*/

int DenoiserHandle::channels() const {
    if (kind == Kind::analytic)
        return prior ? prior->dim : 0;
    return net ? net->geo.channels : 0;
}

DenoiserHandle make_analytic(GaussianPrior prior) {
    if (prior.dim < 1)
        throw std::invalid_argument("make_analytic: empty prior");
    // SPD check up front so bad priors fail at construction
    if (prior.chol.empty())
        prior.chol = cholesky(prior.cov, prior.dim, "make_analytic");
    DenoiserHandle d;
    d.kind = DenoiserHandle::Kind::analytic;
    d.prior = std::make_shared<const GaussianPrior>(std::move(prior));
    d.factors = std::make_shared<AnalyticFactorCache>();
    return d;
}

DenoiserHandle make_toy_unet(const UNetGeometry& geo, uint64_t seed) {
    if (geo.channels < 1 || geo.base_width < 8 || geo.base_width % 8 != 0)
        throw std::invalid_argument("make_toy_unet: bad geometry (base_width must be a "
                                    "positive multiple of 8)");
    DenoiserHandle d;
    d.kind = DenoiserHandle::Kind::toy_unet;
    d.net = std::make_shared<const UNet>(geo, seed);
    return d;
}

void save_toy_unet(const DenoiserHandle& d, const std::string& path) {
    if (d.kind != DenoiserHandle::Kind::toy_unet || !d.net)
        throw std::invalid_argument("save_toy_unet: handle is not a toy U-Net");
    save_stw1(d.net->to_tensor_file(), path);
}

DenoiserHandle load_toy_unet(const std::string& path) {
    DenoiserHandle d;
    d.kind = DenoiserHandle::Kind::toy_unet;
    d.net = std::make_shared<const UNet>(load_stw1(path));
    return d;
}

uint64_t toy_unet_checksum(const DenoiserHandle& d) {
    if (d.kind != DenoiserHandle::Kind::toy_unet || !d.net)
        throw std::invalid_argument("toy_unet_checksum: handle is not a toy U-Net");
    TensorFile tf = d.net->to_tensor_file();
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& t : tf.tensors) {
        h = fnv1a(t.name, h);
        h = fnv1a_bytes(t.data.data(), t.data.size() * sizeof(float), h);
    }
    return h;
}

Slice2D predict_noise(const DenoiserHandle& d, const Slice2D& x, int tau,
                      const NoiseSchedule& sched, const PromptEmbedding& p) {
    std::vector<const Slice2D*> xs{&x};
    std::vector<std::vector<int>> ctx{{0}};
    std::vector<int> labels{0};
    return std::move(predict_noise_batch(d, xs, tau, sched, p, ctx, labels, nullptr)[0]);
}

std::vector<Slice2D> predict_noise_batch(const DenoiserHandle& d,
                                         const std::vector<const Slice2D*>& xs,
                                         int tau, const NoiseSchedule& sched,
                                         const PromptEmbedding& p,
                                         const std::vector<std::vector<int>>& context,
                                         const std::vector<int>& frame_labels,
                                         const AttentionControl* control) {
    if (tau < 1 || tau > sched.T)
        throw std::invalid_argument("predict_noise: tau out of range");
    if (xs.empty())
        throw std::invalid_argument("predict_noise: empty batch");
    if (context.size() != xs.size() || frame_labels.size() != xs.size())
        throw std::invalid_argument("predict_noise: batch metadata size mismatch");

    if (d.kind == DenoiserHandle::Kind::analytic) {
        std::vector<Slice2D> out;
        out.reserve(xs.size());
        for (const Slice2D* x : xs) {
            Slice2D r(x->rows, x->cols, x->channels, x->axis, x->index);
            r.data = analytic_predict(*d.prior, x->data.data(), x->data.size(),
                                      sched.alpha_bar[tau], d.factors.get());
            out.push_back(std::move(r));
        }
        return out;
    }
    if (!d.net)
        throw std::invalid_argument("predict_noise: empty handle");
    return d.net->forward(xs, tau, p, context, frame_labels, control);
}

/*================================ guidance ================================*/

void cfg(const float* eps_cond, const float* eps_uncond, float* out, size_t n, double s) {
    kernels::axpby(static_cast<float>(s), eps_cond, static_cast<float>(1.0 - s), eps_uncond,
                   out, n);
}

Slice2D cfg(const Slice2D& eps_cond, const Slice2D& eps_uncond, double s) {
    if (eps_cond.rows != eps_uncond.rows || eps_cond.cols != eps_uncond.cols ||
        eps_cond.channels != eps_uncond.channels)
        throw std::invalid_argument("cfg: shape mismatch");
    Slice2D out(eps_cond.rows, eps_cond.cols, eps_cond.channels, eps_cond.axis,
                eps_cond.index);
    cfg(eps_cond.data.data(), eps_uncond.data.data(), out.data.data(), out.data.size(), s);
    return out;
}

} // namespace stvedit
