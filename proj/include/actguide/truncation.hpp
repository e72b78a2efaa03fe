#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "actguide/action.hpp"
#include "actguide/rng.hpp"

namespace actguide {

enum class TruncationMode { off, action_scaled, fixed };

/// Which action magnitude drives the bound for a frame's initial latent:
/// the mean step norm over the clip being generated, or the norm of the
/// single action conditioning that frame.
enum class NormSource { episode_mean, per_step };

struct TruncationConfig {
    double tau_min = 0.5;
    double tau_max = 1.5;
    /// Training-split mean of |a|_2; the sigmoid is centred here.
    double mu_act = 0.0;
    TruncationMode mode = TruncationMode::off;
    double fixed_tau = 1.0;
    NormSource norm_source = NormSource::episode_mean;

    void validate() const;
};

/// Logistic function, evaluated without overflow for large |x|.
double stable_sigmoid(double x);

/// Element-wise bound for the initial latent given an action magnitude.
/// Returns +infinity when truncation is off.
double truncation_limit(double norm, const TruncationConfig& cfg);
double truncation_limit(const ActionVector& a, const TruncationConfig& cfg);

/// Upper bound on N(0,1) draws spent on a single accepted entry.
inline constexpr std::size_t kMaxDrawsPerEntry = 1'000'000;

/// n independent draws from N(0,1) conditioned on |z| <= tau, by rejection.
std::vector<double> sample_truncated_normal(double tau, std::size_t n, Rng& rng);

double empirical_mean_action_norm(std::span<const ActionVector> actions);

/// Initial latent for one generation. `norm` is the action magnitude selected
/// according to cfg.norm_source by the caller.
std::vector<double> init_latent(double norm, std::size_t dim, const TruncationConfig& cfg, Rng& rng);
std::vector<double> init_latent(const ActionVector& a, std::size_t dim, const TruncationConfig& cfg, Rng& rng);

}  // namespace actguide
