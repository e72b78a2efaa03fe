#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "actguide/diffusion.hpp"
#include "actguide/guidance.hpp"
#include "actguide/mlp.hpp"
#include "actguide/truncation.hpp"

namespace actguide {

enum class RolloutMode { short_trajectory, long_trajectory };

/// Everything that determines an experiment run. Serialized as `key = value`
/// lines; see docs/config.md for the key list.
struct ExperimentConfig {
    std::uint64_t seed = 42;
    int train_episodes = 2000;
    int val_episodes = 100;
    int test_episodes = 200;
    /// 0 evaluates the whole test split.
    int eval_episodes = 0;

    RolloutMode rollout = RolloutMode::short_trajectory;
    int long_passes = 3;

    int diffusion_steps = 100;
    double beta_start = 1e-3;
    double beta_end = 0.2;
    SamplerOptions sampler;

    /// Base guidance settings; the variant grid chooses the mode.
    GuidanceConfig guidance{GuidanceMode::action_scaled};
    /// Base truncation settings; the variant grid chooses the mode.
    /// An empty mu_act means "compute from the training split".
    TruncationConfig truncation{};
    std::optional<double> mu_act;

    std::vector<double> ablation_omegas{1.0, 3.0};
    std::vector<double> ablation_taus{1.0, 1.5};

    TrainConfig train;

    std::string output_dir = "run";
    int workers = 1;

    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig parse(const std::string& text, const std::string& origin = "<config>");

    /// Applies one `key = value` assignment; unknown keys are rejected.
    void set(const std::string& key, const std::string& value);

    /// Canonical text form; parse(to_text()) reproduces the config.
    std::string to_text() const;

    void validate() const;

    DiffusionSchedule schedule() const { return make_schedule(diffusion_steps, beta_start, beta_end); }

    std::string path(const std::string& file) const;
    std::uint64_t split_seed(int split) const;
};

}  // namespace actguide
