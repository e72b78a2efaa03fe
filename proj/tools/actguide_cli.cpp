// actguide: experiment runner for action-scaled guidance and noise truncation
// on the toy point-mass world.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "actguide/config.hpp"
#include "actguide/error.hpp"
#include "actguide/harness.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> workers;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "Experiment config file (key = value lines)");
    cmd->add_option("--seed", flags.seed, "Override the run seed");
    cmd->add_option("--out", flags.out, "Override the output directory");
    cmd->add_option("--workers", flags.workers, "Parallel episode workers");
    cmd->add_option("--set", flags.overrides, "Extra config assignment, e.g. --set train.steps=500");
}

actguide::ExperimentConfig load_config(const CommonFlags& flags) {
    actguide::ExperimentConfig cfg =
        flags.config_path.empty() ? actguide::ExperimentConfig{} : actguide::ExperimentConfig::from_file(flags.config_path);
    for (const auto& kv : flags.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw actguide::InvalidInput("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.out) cfg.output_dir = *flags.out;
    if (flags.workers) cfg.workers = *flags.workers;
    cfg.validate();
    return cfg;
}

void print_report(const actguide::ExperimentReport& report) {
    std::printf("%-36s %10s %8s %10s %8s %s\n", "variant", "psnr", "ssim", "latent_l2", "episodes", "failures");
    for (const auto& s : report.summary)
        std::printf("%-36s %10.4f %8.4f %10.5f %8d %d\n", s.name.c_str(), s.mean_psnr, s.mean_ssim, s.mean_latent_l2,
                    s.episodes, s.failures);
    std::printf("mu_act = %.6f, wall clock %.1f s\n", report.mu_act, report.wall_clock_seconds);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Action-scaled guidance and noise truncation on a toy robot world"};
    app.require_subcommand(1);

    CommonFlags flags;
    auto* gen = app.add_subcommand("gen-dataset", "Generate train/val/test splits");
    auto* train = app.add_subcommand("train", "Train the MLP noise predictor");
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate baseline, +CFG and +CFG & truncation");
    auto* ablate = app.add_subcommand("ablate", "Fixed vs action-scaled guidance and truncation grid");
    auto* oracle = app.add_subcommand("oracle-check", "Verify guidance and sampling on the exact Gaussian oracle");
    auto* dump = app.add_subcommand("dump-frames", "Write per-variant frame strips as PGM images");
    for (auto* cmd : {gen, train, evaluate, ablate, oracle, dump}) add_common(cmd, flags);

    std::vector<std::uint32_t> episode_ids;
    int scale = 4;
    dump->add_option("--episodes", episode_ids, "Test episode ids")->required()->delimiter(',');
    dump->add_option("--scale", scale, "Pixel upscaling factor")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = load_config(flags);
        if (gen->parsed()) {
            for (const auto& p : actguide::cmd_gen_dataset(cfg)) std::printf("wrote %s\n", p.c_str());
        } else if (train->parsed()) {
            const int every = std::max(1, cfg.train.steps / 20);
            const auto result = actguide::cmd_train(cfg, [every](int step, double loss) {
                if (step % every == 0) std::printf("step %6d  loss %.6f\n", step, loss);
            });
            std::printf("final loss %.6f, checkpoint %s\n", result.loss_curve.back(), cfg.path("model.ckpt").c_str());
        } else if (evaluate->parsed()) {
            print_report(actguide::cmd_evaluate(cfg));
        } else if (ablate->parsed()) {
            print_report(actguide::cmd_ablate(cfg));
        } else if (oracle->parsed()) {
            bool all = true;
            for (const auto& c : actguide::cmd_oracle_check(cfg.seed)) {
                std::printf("[%s] %s (measured %.3g, threshold %.3g)\n", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                            c.measured, c.threshold);
                all = all && c.passed;
            }
            return all ? 0 : 1;
        } else if (dump->parsed()) {
            for (const auto& p : actguide::cmd_dump_frames(cfg, episode_ids, scale)) std::printf("wrote %s\n", p.c_str());
        }
    } catch (const actguide::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(e.category());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
