#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "actguide/action.hpp"
#include "actguide/frame.hpp"
#include "actguide/guidance.hpp"
#include "actguide/rng.hpp"

namespace actguide {

using Latent = std::vector<double>;

/// Linear-beta DDPM schedule. Step t runs 1..steps; index t - 1 in the tables.
struct DiffusionSchedule {
    int steps = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;

    /// alpha_bar at step t, with alpha_bar(0) == 1.
    double alpha_bar_at(int t) const;
};

DiffusionSchedule make_schedule(int steps, double beta_start, double beta_end);

/// sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps
Latent forward_noise(std::span<const double> x0, int t, std::span<const double> eps, const DiffusionSchedule& sched);

/// What the denoiser is conditioned on. `prev_frame` may be null for
/// denoisers that ignore it.
struct Condition {
    const Frame* prev_frame = nullptr;
    ActionVector action;
};

/// Pure noise predictor: identical inputs give identical outputs, and
/// implementations must be safe to call concurrently.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual std::size_t latent_dim() const = 0;
    virtual Latent predict_epsilon(std::span<const double> x_t, int t, const Condition& cond) const = 0;
};

enum class SamplerKind { ancestral, deterministic };

struct SamplerOptions {
    SamplerKind kind = SamplerKind::deterministic;
    bool clamp_x0 = true;
    double clamp_limit = 3.0;
};

struct SampleResult {
    Latent x0;
    std::int64_t denoiser_evaluations = 0;
    int guided_steps = 0;
};

/// Reverse diffusion from z0 at t = T down to t = 1. Evaluates the denoiser on
/// the negated action as well whenever the guidance weight is positive.
/// Ancestral noise is drawn from `rng`; the deterministic sampler never reads it.
SampleResult sample(const Denoiser& denoiser,
                    const Condition& cond,
                    Latent z0,
                    const DiffusionSchedule& sched,
                    const GuidanceConfig& guidance,
                    Rng& rng,
                    const SamplerOptions& options = {});

}  // namespace actguide
