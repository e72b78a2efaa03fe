#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "actguide/config.hpp"
#include "actguide/diffusion.hpp"
#include "actguide/mlp.hpp"
#include "actguide/toyworld.hpp"

namespace actguide {

enum class Split { train = 0, val = 1, test = 2 };

struct DatasetSplits {
    std::vector<Episode> train;
    std::vector<Episode> val;
    std::vector<Episode> test;
};

/// Train and val episodes carry 15 actions; test episodes carry
/// 15 * long_passes so the same episodes serve both rollout protocols.
DatasetSplits make_splits(const ExperimentConfig& cfg);

/// A named point of the evaluation grid.
struct Variant {
    std::string name;
    GuidanceConfig guidance;
    TruncationConfig truncation;
};

/// baseline, +action-scaled CFG, +action-scaled CFG and truncation.
std::vector<Variant> evaluation_variants(const ExperimentConfig& cfg, double mu_act);

/// {fixed omegas..., action-scaled omega} x {fixed taus..., action-scaled tau, off}.
std::vector<Variant> ablation_variants(const ExperimentConfig& cfg, double mu_act);

struct EpisodeRow {
    std::uint32_t episode = 0;
    std::size_t variant = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    double latent_l2 = 0.0;
    std::int64_t denoiser_evaluations = 0;
    int guided_steps = 0;
    std::string status = "ok";
    std::vector<Frame> frames;  // only populated when requested
};

struct VariantSummary {
    std::string name;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    double mean_latent_l2 = 0.0;
    int episodes = 0;
    int failures = 0;
    std::int64_t denoiser_evaluations = 0;
};

struct ExperimentReport {
    std::string command;
    std::string config_text;
    double mu_act = 0.0;
    double wall_clock_seconds = 0.0;
    std::vector<Variant> variants;
    std::vector<EpisodeRow> rows;  // sorted by (episode, variant)
    std::vector<VariantSummary> summary;

    const VariantSummary& variant_summary(const std::string& name) const;

    /// One row per episode x variant. Contains no timing data, so identical
    /// runs produce identical bytes.
    std::string csv() const;
    nlohmann::json aggregate_json() const;
    void write(const std::string& csv_path, const std::string& json_path) const;
};

struct EvaluationOptions {
    RolloutMode rollout = RolloutMode::short_trajectory;
    int long_passes = 3;
    SamplerOptions sampler;
    std::uint64_t seed = 42;
    int workers = 1;
    /// Restrict to these episode indices; empty means all.
    std::vector<std::uint32_t> episodes;
    bool keep_frames = false;
};

/// Rolls out every variant on every episode. The noise stream for an episode
/// depends only on (seed, episode index), so variants are compared on
/// shared noise whenever their truncation modes match.
ExperimentReport run_variant_grid(const Denoiser& model, const DiffusionSchedule& sched,
                                  const std::vector<Episode>& episodes, const std::vector<Variant>& variants,
                                  const EvaluationOptions& options);

EvaluationOptions evaluation_options(const ExperimentConfig& cfg);

double resolve_mu_act(const ExperimentConfig& cfg, const std::vector<Episode>& train);

// Command entry points. Each reads and writes files under cfg.output_dir.
std::vector<std::string> cmd_gen_dataset(const ExperimentConfig& cfg);
TrainResult cmd_train(const ExperimentConfig& cfg, const TrainProgress& progress = {});
ExperimentReport cmd_evaluate(const ExperimentConfig& cfg);
ExperimentReport cmd_ablate(const ExperimentConfig& cfg);
std::vector<std::string> cmd_dump_frames(const ExperimentConfig& cfg, const std::vector<std::uint32_t>& episode_ids,
                                         int scale = 4);

struct OracleCheck {
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double threshold = 0.0;
};

/// Exact-oracle verification of guidance algebra, the closed-form noise
/// predictor and the samplers on the linear-Gaussian world.
std::vector<OracleCheck> cmd_oracle_check(std::uint64_t seed = 42);

/// Binary 8-bit graymap of the frames laid side by side, upscaled by `scale`.
void write_pgm_strip(const std::string& path, const std::vector<Frame>& frames, int scale);

}  // namespace actguide
