#include "stvedit/schedule.hpp"

#include "stvedit/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace stvedit {

NoiseSchedule make_schedule(int T, double beta_start, double beta_end, double eta) {
    if (T < 1)
        throw std::invalid_argument("make_schedule: T must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw std::invalid_argument("make_schedule: need 0 < beta_start <= beta_end < 1");
    if (eta < 0.0 || eta > 1.0)
        throw std::invalid_argument("make_schedule: eta must lie in [0, 1]");

    NoiseSchedule s;
    s.T = T;
    s.eta = eta;
    s.beta.assign(T + 1, 0.0);
    s.alpha.assign(T + 1, 0.0);
    s.alpha_bar.assign(T + 1, 0.0);
    s.sigma.assign(T + 1, 0.0);

    for (int tau = 1; tau <= T; ++tau) {
        s.beta[tau] = T == 1 ? beta_start
                             : beta_start + (beta_end - beta_start) * (tau - 1) / (T - 1);
        s.alpha[tau] = 1.0 - s.beta[tau];
    }
    s.alpha_bar[0] = 1.0 - eta * eta * s.beta[1];
    double prod = 1.0;
    for (int tau = 1; tau <= T; ++tau) {
        prod *= s.alpha[tau];
        s.alpha_bar[tau] = prod;
    }
    s.sigma[1] = eta * std::sqrt(s.beta[1]);
    for (int tau = 2; tau <= T; ++tau) {
        double v = (1.0 - s.alpha_bar[tau - 1]) / (1.0 - s.alpha_bar[tau]) * s.beta[tau];
        s.sigma[tau] = eta * std::sqrt(v);
    }
    return s;
}

namespace {

void check_tau(int tau, const NoiseSchedule& sched, const char* who) {
    if (tau < 1 || tau > sched.T)
        throw std::invalid_argument(std::string(who) + ": tau " + std::to_string(tau) +
                                    " outside [1, " + std::to_string(sched.T) + "]");
}

struct MuCoeffs {
    double cx; // on x_tau
    double ce; // on eps
};

MuCoeffs mu_coeffs(int tau, const NoiseSchedule& sched) {
    const double abar = sched.alpha_bar[tau];
    const double abar_prev = sched.alpha_bar_prev(tau);
    const double sig = sched.sigma[tau];
    const double rad = 1.0 - abar_prev - sig * sig;
    if (rad < -1e-12)
        throw std::domain_error("mu_hat: negative radicand at tau " + std::to_string(tau) +
                                " (inconsistent eta/beta schedule)");
    const double d = std::sqrt(rad < 0.0 ? 0.0 : rad);
    // mu = sqrt(abar_prev) * (x - sqrt(1-abar) eps) / sqrt(abar) + d * eps
    const double cx = std::sqrt(abar_prev / abar);
    const double ce = d - std::sqrt(abar_prev * (1.0 - abar) / abar);
    return {cx, ce};
}

} // namespace

void forward_noise(const float* x0, const float* eps, float* out, size_t n,
                   int tau, const NoiseSchedule& sched) {
    check_tau(tau, sched, "forward_noise");
    const double abar = sched.alpha_bar[tau];
    kernels::axpby(static_cast<float>(std::sqrt(abar)), x0,
                   static_cast<float>(std::sqrt(1.0 - abar)), eps, out, n);
}

void mu_hat(const float* x_tau, const float* eps_pred, float* out, size_t n,
            int tau, const NoiseSchedule& sched) {
    check_tau(tau, sched, "mu_hat");
    MuCoeffs c = mu_coeffs(tau, sched);
    kernels::axpby(static_cast<float>(c.cx), x_tau, static_cast<float>(c.ce), eps_pred, out, n);
}

void extract_noise(const float* x_prev, const float* mu, float* out, size_t n,
                   int tau, const NoiseSchedule& sched) {
    check_tau(tau, sched, "extract_noise");
    const double sig = sched.sigma[tau];
    if (sig <= 0.0)
        throw std::domain_error("extract_noise: sigma is 0 at tau " + std::to_string(tau) +
                                " (DDIM has no extractable noise)");
    const float inv = static_cast<float>(1.0 / sig);
    kernels::axpby(inv, x_prev, -inv, mu, out, n);
}

double forward_noise_scalar(double x0, double eps, int tau, const NoiseSchedule& sched) {
    check_tau(tau, sched, "forward_noise");
    const double abar = sched.alpha_bar[tau];
    return std::sqrt(abar) * x0 + std::sqrt(1.0 - abar) * eps;
}

double mu_hat_scalar(double x_tau, double eps_pred, int tau, const NoiseSchedule& sched) {
    check_tau(tau, sched, "mu_hat");
    MuCoeffs c = mu_coeffs(tau, sched);
    return c.cx * x_tau + c.ce * eps_pred;
}

} // namespace stvedit
