#include "actguide/gaussian_oracle.hpp"

#include <algorithm>
#include <cmath>

#include "actguide/error.hpp"

namespace actguide {

void GaussianWorld::validate() const {
    if (out_dim < 1 || action_dim < 1) throw InvalidInput("gaussian world dimensions must be positive");
    if (weights.size() != static_cast<std::size_t>(out_dim * action_dim))
        throw InvalidInput("gaussian world weight matrix has the wrong size");
    if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) throw InvalidInput("sigma0 must be finite and > 0");
    for (double w : weights)
        if (!std::isfinite(w)) throw InvalidInput("gaussian world weights must be finite");
}

std::vector<double> GaussianWorld::mean(const ActionVector& a) const {
    if (a.dim() != static_cast<std::size_t>(action_dim)) throw InvalidInput("action dimension mismatch");
    std::vector<double> m(static_cast<std::size_t>(out_dim), 0.0);
    for (int r = 0; r < out_dim; ++r)
        for (int c = 0; c < action_dim; ++c)
            m[static_cast<std::size_t>(r)] += weights[static_cast<std::size_t>(r * action_dim + c)] * a[static_cast<std::size_t>(c)];
    return m;
}

GaussianWorld GaussianWorld::default_world() {
    return GaussianWorld{4, 2, {1.0, 0.5, -0.5, 2.0, 1.0, 0.5, -0.5, 2.0}, 0.3};
}

Latent exact_epsilon(std::span<const double> x_t, int t, const ActionVector& a, const GaussianWorld& world,
                     const DiffusionSchedule& sched) {
    if (x_t.size() != static_cast<std::size_t>(world.out_dim)) throw InvalidInput("latent dimension mismatch");
    const double ab = sched.alpha_bar_at(t);
    const double sqrt_ab = std::sqrt(ab);
    const double scale = std::sqrt(1.0 - ab) / (ab * world.sigma0 * world.sigma0 + (1.0 - ab));
    const auto mu = world.mean(a);
    Latent eps(x_t.size());
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = scale * (x_t[i] - sqrt_ab * mu[i]);
    return eps;
}

AmplifiedCheck guided_equals_amplified_check(std::span<const double> x_t, int t, const ActionVector& a, double omega,
                                             const GaussianWorld& world, const DiffusionSchedule& sched,
                                             double tolerance) {
    const Latent pos = exact_epsilon(x_t, t, a, world, sched);
    const Latent neg = exact_epsilon(x_t, t, negate_action(a), world, sched);
    const Latent guided = guided_epsilon(pos, neg, omega, GuidanceParameterization::conditional_anchor);
    const Latent amplified = exact_epsilon(x_t, t, a.scaled(1.0 + 2.0 * omega), world, sched);
    AmplifiedCheck out;
    for (std::size_t i = 0; i < guided.size(); ++i)
        out.max_residual = std::max(out.max_residual, std::abs(guided[i] - amplified[i]));
    out.ok = out.max_residual <= tolerance;
    return out;
}

GaussianOracleDenoiser::GaussianOracleDenoiser(GaussianWorld world, DiffusionSchedule sched)
    : world_(std::move(world)), sched_(std::move(sched)) {
    world_.validate();
}

Latent GaussianOracleDenoiser::predict_epsilon(std::span<const double> x_t, int t, const Condition& cond) const {
    return exact_epsilon(x_t, t, cond.action, world_, sched_);
}

}  // namespace actguide
