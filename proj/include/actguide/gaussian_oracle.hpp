#pragma once

#include <span>
#include <vector>

#include "actguide/action.hpp"
#include "actguide/diffusion.hpp"
#include "actguide/guidance.hpp"

namespace actguide {

/// Linear-Gaussian world: x0 | a ~ N(W a, sigma0^2 I). Its optimal noise
/// predictor is known in closed form, which makes guidance and sampling
/// arithmetic exactly checkable.
struct GaussianWorld {
    int out_dim = 0;
    int action_dim = 0;
    std::vector<double> weights;  // out_dim x action_dim, row-major
    double sigma0 = 0.3;

    void validate() const;
    std::vector<double> mean(const ActionVector& a) const;

    /// 4x2 world with weights {1, 0.5, -0.5, 2, 1, 0.5, -0.5, 2} and sigma0 = 0.3.
    static GaussianWorld default_world();
};

/// E[eps | x_t, a] = sqrt(1 - ab) (x_t - sqrt(ab) W a) / (ab sigma0^2 + 1 - ab).
Latent exact_epsilon(std::span<const double> x_t, int t, const ActionVector& a, const GaussianWorld& world,
                     const DiffusionSchedule& sched);

struct AmplifiedCheck {
    bool ok = false;
    double max_residual = 0.0;
};

/// Compares conditional-anchor guidance on (eps*(a), eps*(-a)) against the
/// unguided prediction for the amplified action (1 + 2 omega) a.
AmplifiedCheck guided_equals_amplified_check(std::span<const double> x_t, int t, const ActionVector& a, double omega,
                                             const GaussianWorld& world, const DiffusionSchedule& sched,
                                             double tolerance = 1e-9);

class GaussianOracleDenoiser final : public Denoiser {
public:
    GaussianOracleDenoiser(GaussianWorld world, DiffusionSchedule sched);

    std::size_t latent_dim() const override { return static_cast<std::size_t>(world_.out_dim); }
    Latent predict_epsilon(std::span<const double> x_t, int t, const Condition& cond) const override;

    const GaussianWorld& world() const noexcept { return world_; }

private:
    GaussianWorld world_;
    DiffusionSchedule sched_;
};

}  // namespace actguide
