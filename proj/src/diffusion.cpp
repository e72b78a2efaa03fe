#include "actguide/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "actguide/error.hpp"

namespace actguide {

double DiffusionSchedule::alpha_bar_at(int t) const {
    if (t == 0) return 1.0;
    if (t < 0 || t > steps) throw InvalidInput("schedule step " + std::to_string(t) + " out of range");
    return alpha_bar[static_cast<std::size_t>(t - 1)];
}

DiffusionSchedule make_schedule(int steps, double beta_start, double beta_end) {
    if (steps < 2) throw InvalidInput("diffusion schedule needs at least 2 steps");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw InvalidInput("beta bounds must satisfy 0 < beta_start <= beta_end < 1");
    DiffusionSchedule s;
    s.steps = steps;
    s.beta.resize(static_cast<std::size_t>(steps));
    s.alpha.resize(s.beta.size());
    s.alpha_bar.resize(s.beta.size());
    double prod = 1.0;
    for (int i = 0; i < steps; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(steps - 1);
        const auto k = static_cast<std::size_t>(i);
        s.beta[k] = beta_start + (beta_end - beta_start) * frac;
        s.alpha[k] = 1.0 - s.beta[k];
        prod *= s.alpha[k];
        s.alpha_bar[k] = prod;
    }
    return s;
}

Latent forward_noise(std::span<const double> x0, int t, std::span<const double> eps, const DiffusionSchedule& sched) {
    if (x0.size() != eps.size()) throw InvalidInput("forward_noise: x0 and eps shapes differ");
    const double ab = sched.alpha_bar_at(t);
    const double a = std::sqrt(ab);
    const double b = std::sqrt(1.0 - ab);
    Latent out(x0.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + b * eps[i];
    return out;
}

namespace {

void require_finite(const Latent& v, int t, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x))
            throw NumericalError(std::string("non-finite ") + what + " at diffusion step " + std::to_string(t), t);
    }
}

}  // namespace

SampleResult sample(const Denoiser& denoiser,
                    const Condition& cond,
                    Latent z0,
                    const DiffusionSchedule& sched,
                    const GuidanceConfig& guidance,
                    Rng& rng,
                    const SamplerOptions& options) {
    const std::size_t dim = denoiser.latent_dim();
    if (z0.size() != dim) throw InvalidInput("initial latent does not match denoiser dimension");
    guidance.validate();

    SampleResult result;
    Latent x = std::move(z0);
    Latent x0_hat(dim);
    std::normal_distribution<double> normal(0.0, 1.0);
    Condition negated{cond.prev_frame, negate_action(cond.action)};

    for (int t = sched.steps; t >= 1; --t) {
        Latent eps = denoiser.predict_epsilon(x, t, cond);
        ++result.denoiser_evaluations;
        const double omega = guidance_weight(cond.action, t, sched.steps, guidance);
        if (omega > 0.0) {
            const Latent eps_neg = denoiser.predict_epsilon(x, t, negated);
            ++result.denoiser_evaluations;
            ++result.guided_steps;
            eps = guided_epsilon(eps, eps_neg, omega, guidance.parameterization);
        }
        require_finite(eps, t, "noise prediction");

        const double ab = sched.alpha_bar_at(t);
        const double ab_prev = sched.alpha_bar_at(t - 1);
        const double sqrt_ab = std::sqrt(ab);
        const double sqrt_1m_ab = std::sqrt(1.0 - ab);
        for (std::size_t i = 0; i < dim; ++i) {
            double v = (x[i] - sqrt_1m_ab * eps[i]) / sqrt_ab;
            if (options.clamp_x0) v = std::clamp(v, -options.clamp_limit, options.clamp_limit);
            x0_hat[i] = v;
        }

        if (options.kind == SamplerKind::deterministic) {
            const double a = std::sqrt(ab_prev);
            const double b = std::sqrt(1.0 - ab_prev);
            for (std::size_t i = 0; i < dim; ++i) x[i] = a * x0_hat[i] + b * eps[i];
        } else {
            const std::size_t k = static_cast<std::size_t>(t - 1);
            const double beta = sched.beta[k];
            const double coef_x0 = std::sqrt(ab_prev) * beta / (1.0 - ab);
            const double coef_xt = std::sqrt(sched.alpha[k]) * (1.0 - ab_prev) / (1.0 - ab);
            const double sigma = t > 1 ? std::sqrt(beta * (1.0 - ab_prev) / (1.0 - ab)) : 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                x[i] = coef_x0 * x0_hat[i] + coef_xt * x[i];
                if (t > 1) x[i] += sigma * normal(rng);
            }
        }
        require_finite(x, t, "latent");
    }
    result.x0 = std::move(x);
    return result;
}

}  // namespace actguide
