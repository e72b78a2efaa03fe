#pragma once

#include <span>
#include <vector>

#include "actguide/action.hpp"

namespace actguide {

enum class GuidanceMode { off, action_scaled, fixed };

/// How the positive and negated-action predictions are combined.
///  - conditional_anchor: eps_pos + w (eps_pos - eps_neg)
///  - negative_anchor:    eps_neg + w (eps_pos - eps_neg)
/// conditional_anchor at w equals negative_anchor at w + 1.
enum class GuidanceParameterization { conditional_anchor, negative_anchor };

struct GuidanceConfig {
    GuidanceMode mode = GuidanceMode::off;
    double lambda = 1.0;
    double fixed_omega = 1.0;
    GuidanceParameterization parameterization = GuidanceParameterization::conditional_anchor;
    /// Guidance is active while t > total_steps * active_fraction.
    double active_fraction = 0.5;

    void validate() const;
};

double action_norm(const ActionVector& a);

ActionVector negate_action(const ActionVector& a);

/// Guidance weight at noise level t (t == total_steps is the first, noisiest
/// sampling step). action_scaled: lambda * |a|_2 while t > T * active_fraction.
double guidance_weight(const ActionVector& a, int t, int total_steps, const GuidanceConfig& cfg);

std::vector<double> guided_epsilon(std::span<const double> eps_pos,
                                   std::span<const double> eps_neg,
                                   double omega,
                                   GuidanceParameterization parameterization);

}  // namespace actguide
