#include "actguide/truncation.hpp"

#include <cmath>
#include <limits>

#include "actguide/error.hpp"
#include "actguide/guidance.hpp"

namespace actguide {

void TruncationConfig::validate() const {
    if (!(tau_min > 0.0) || !(tau_min <= tau_max) || !std::isfinite(tau_max))
        throw InvalidInput("truncation bounds must satisfy 0 < tau_min <= tau_max");
    if (!(mu_act >= 0.0) || !std::isfinite(mu_act)) throw InvalidInput("mu_act must be finite and >= 0");
    if (mode == TruncationMode::fixed && !(fixed_tau > 0.0)) throw InvalidInput("fixed_tau must be > 0");
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double truncation_limit(double norm, const TruncationConfig& cfg) {
    switch (cfg.mode) {
        case TruncationMode::off:
            return std::numeric_limits<double>::infinity();
        case TruncationMode::fixed:
            return cfg.fixed_tau;
        case TruncationMode::action_scaled:
            return cfg.tau_min + (cfg.tau_max - cfg.tau_min) * stable_sigmoid(norm - cfg.mu_act);
    }
    return std::numeric_limits<double>::infinity();
}

double truncation_limit(const ActionVector& a, const TruncationConfig& cfg) {
    return truncation_limit(action_norm(a), cfg);
}

std::vector<double> sample_truncated_normal(double tau, std::size_t n, Rng& rng) {
    if (!(tau > 0.0)) throw InvalidInput("truncation limit must be > 0");
    if (n == 0) throw InvalidInput("sample count must be >= 1");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> out(n);
    for (double& z : out) {
        std::size_t draws = 0;
        do {
            if (++draws > kMaxDrawsPerEntry)
                throw InvalidInput("truncated normal rejection stalled; tau=" + std::to_string(tau) +
                                   " is implausibly small");
            z = normal(rng);
        } while (!(std::abs(z) <= tau));
    }
    return out;
}

double empirical_mean_action_norm(std::span<const ActionVector> actions) {
    if (actions.empty()) throw InvalidInput("cannot average norms of an empty action list");
    double sum = 0.0;
    for (const auto& a : actions) sum += action_norm(a);
    return sum / static_cast<double>(actions.size());
}

std::vector<double> init_latent(double norm, std::size_t dim, const TruncationConfig& cfg, Rng& rng) {
    if (dim == 0) throw InvalidInput("latent dimension must be >= 1");
    if (cfg.mode == TruncationMode::off) {
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<double> z(dim);
        for (double& v : z) v = normal(rng);
        return z;
    }
    return sample_truncated_normal(truncation_limit(norm, cfg), dim, rng);
}

std::vector<double> init_latent(const ActionVector& a, std::size_t dim, const TruncationConfig& cfg, Rng& rng) {
    return init_latent(action_norm(a), dim, cfg, rng);
}

}  // namespace actguide
