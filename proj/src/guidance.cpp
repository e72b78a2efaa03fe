#include "actguide/guidance.hpp"

#include <cmath>

#include "actguide/error.hpp"

namespace actguide {

void GuidanceConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidInput("guidance lambda must be finite and >= 0");
    if (!(fixed_omega >= 0.0) || !std::isfinite(fixed_omega))
        throw InvalidInput("fixed guidance weight must be finite and >= 0");
    if (!(active_fraction > 0.0 && active_fraction <= 1.0))
        throw InvalidInput("guidance active_fraction must lie in (0, 1]");
}

double action_norm(const ActionVector& a) {
    double sum = 0.0;
    for (double v : a.values()) sum += v * v;
    return std::sqrt(sum);
}

ActionVector negate_action(const ActionVector& a) { return a.scaled(-1.0); }

double guidance_weight(const ActionVector& a, int t, int total_steps, const GuidanceConfig& cfg) {
    if (total_steps < 1 || t < 1 || t > total_steps)
        throw InvalidInput("guidance step " + std::to_string(t) + " outside [1, " + std::to_string(total_steps) + "]");
    switch (cfg.mode) {
        case GuidanceMode::off:
            return 0.0;
        case GuidanceMode::fixed:
            return cfg.fixed_omega;
        case GuidanceMode::action_scaled:
            return static_cast<double>(t) > cfg.active_fraction * total_steps ? cfg.lambda * action_norm(a) : 0.0;
    }
    return 0.0;
}

std::vector<double> guided_epsilon(std::span<const double> eps_pos,
                                   std::span<const double> eps_neg,
                                   double omega,
                                   GuidanceParameterization parameterization) {
    if (eps_pos.size() != eps_neg.size()) throw InvalidInput("guided_epsilon: prediction lengths differ");
    if (!std::isfinite(omega)) throw InvalidInput("guided_epsilon: non-finite guidance weight");
    std::vector<double> out(eps_pos.size());
    const bool anchor_pos = parameterization == GuidanceParameterization::conditional_anchor;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double anchor = anchor_pos ? eps_pos[i] : eps_neg[i];
        out[i] = anchor + omega * (eps_pos[i] - eps_neg[i]);
    }
    return out;
}

}  // namespace actguide
