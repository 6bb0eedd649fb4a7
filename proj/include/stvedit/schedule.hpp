#pragma once

#include <cstddef>
#include <vector>

namespace stvedit {

// DDPM/DDIM noise schedule and per-step mean/noise-extraction math.
// Schedule scalars are kept in 64-bit; tensor data stays 32-bit.
//
// tau runs 1..T. alpha_bar_prev(1) is 1 - eta^2 * beta[1]: with eta = 0 this
// is the plain "alpha_bar_0 = 1" convention (a perfect noise prediction at
// tau = 1 reproduces x0 exactly); with eta > 0 it keeps sigma[1] > 0 so the
// last sampling step still has an extractable noise slot, which the exact
// inversion/reconstruction round trip relies on.
struct NoiseSchedule {
    int T = 0;
    double eta = 1.0;               // 1 = DDPM, 0 = DDIM
    std::vector<double> beta;       // [1..T], index 0 unused
    std::vector<double> alpha;      // 1 - beta
    std::vector<double> alpha_bar;  // cumulative product; slot 0 holds alpha_bar_prev(1)
    std::vector<double> sigma;      // posterior std, 0 everywhere when eta = 0

    double alpha_bar_prev(int tau) const { return alpha_bar[tau - 1]; }
};

// Linear beta spacing between beta_start and beta_end over T steps.
// sigma_tau^2 = eta^2 * (1 - abar_{tau-1}) / (1 - abar_tau) * beta_tau for
// tau >= 2 and eta^2 * beta_1 at tau = 1. Throws std::invalid_argument on
// bad ranges.
NoiseSchedule make_schedule(int T, double beta_start = 0.00085,
                            double beta_end = 0.012, double eta = 1.0);

// x_tau = sqrt(abar_tau) * x0 + sqrt(1 - abar_tau) * eps    (elementwise)
void forward_noise(const float* x0, const float* eps, float* out, size_t n,
                   int tau, const NoiseSchedule& sched);

// mu_hat_tau = sqrt(abar_{tau-1}) * P(eps) + D(eps) with
//   P(eps) = (x_tau - sqrt(1 - abar_tau) * eps) / sqrt(abar_tau)
//   D(eps) = sqrt(1 - abar_{tau-1} - sigma_tau^2) * eps
// Throws std::domain_error when the D radicand is negative (inconsistent
// eta/beta configuration).
void mu_hat(const float* x_tau, const float* eps_pred, float* out, size_t n,
            int tau, const NoiseSchedule& sched);

// z_tau = (x_prev - mu) / sigma_tau. Throws std::domain_error when
// sigma_tau = 0 (DDIM has no extractable noise).
void extract_noise(const float* x_prev, const float* mu, float* out, size_t n,
                   int tau, const NoiseSchedule& sched);

// scalar conveniences for the same formulas (used by tests/oracles)
double forward_noise_scalar(double x0, double eps, int tau, const NoiseSchedule& sched);
double mu_hat_scalar(double x_tau, double eps_pred, int tau, const NoiseSchedule& sched);

} // namespace stvedit
