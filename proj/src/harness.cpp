#include "actguide/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "actguide/error.hpp"
#include "actguide/gaussian_oracle.hpp"
#include "actguide/metrics.hpp"

namespace actguide {

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

void ensure_output_dir(const ExperimentConfig& cfg) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create output directory " + cfg.output_dir + ": " + ec.message());
}

std::vector<Episode> load_split(const ExperimentConfig& cfg, const char* name) {
    const std::string p = cfg.path(std::string(name) + ".tds");
    if (!std::filesystem::exists(p)) throw IoError(p + " does not exist; run gen-dataset first");
    return load_dataset(p);
}

MlpParams load_model(const ExperimentConfig& cfg) {
    const std::string p = cfg.path("model.ckpt");
    if (!std::filesystem::exists(p)) throw IoError(p + " does not exist; run train first");
    return load_checkpoint(p, cfg.train.layer_dims);
}

void score_row(EpisodeRow& row, const std::vector<Frame>& predicted, const Episode& ep) {
    const std::span<const Frame> truth(ep.frames.data() + 1, predicted.size());
    double p = 0.0;
    double s = 0.0;
    for (std::size_t k = 0; k < predicted.size(); ++k) {
        p += psnr(predicted[k], truth[k]);
        s += ssim(predicted[k], truth[k]);
    }
    row.psnr = p / static_cast<double>(predicted.size());
    row.ssim = s / static_cast<double>(predicted.size());
    row.latent_l2 = latent_l2(predicted, truth);
}

}  // namespace

DatasetSplits make_splits(const ExperimentConfig& cfg) {
    return {generate_dataset(static_cast<std::size_t>(cfg.train_episodes), cfg.split_seed(0)),
            generate_dataset(static_cast<std::size_t>(cfg.val_episodes), cfg.split_seed(1)),
            generate_dataset(static_cast<std::size_t>(cfg.test_episodes), cfg.split_seed(2),
                             kActionsPerPass * cfg.long_passes)};
}

std::vector<Variant> evaluation_variants(const ExperimentConfig& cfg, double mu_act) {
    GuidanceConfig off = cfg.guidance;
    off.mode = GuidanceMode::off;
    GuidanceConfig scaled = cfg.guidance;
    scaled.mode = GuidanceMode::action_scaled;
    TruncationConfig no_trunc = cfg.truncation;
    no_trunc.mode = TruncationMode::off;
    no_trunc.mu_act = mu_act;
    TruncationConfig trunc = no_trunc;
    trunc.mode = TruncationMode::action_scaled;
    return {{"baseline", off, no_trunc}, {"cfg", scaled, no_trunc}, {"cfg_trunc", scaled, trunc}};
}

std::vector<Variant> ablation_variants(const ExperimentConfig& cfg, double mu_act) {
    std::vector<std::pair<std::string, GuidanceConfig>> guidances;
    for (double w : cfg.ablation_omegas) {
        GuidanceConfig g = cfg.guidance;
        g.mode = GuidanceMode::fixed;
        g.fixed_omega = w;
        guidances.emplace_back("omega-fixed-" + short_num(w), g);
    }
    GuidanceConfig scaled = cfg.guidance;
    scaled.mode = GuidanceMode::action_scaled;
    guidances.emplace_back("omega-scaled", scaled);

    TruncationConfig base = cfg.truncation;
    base.mu_act = mu_act;
    std::vector<std::pair<std::string, TruncationConfig>> truncations;
    for (double tau : cfg.ablation_taus) {
        TruncationConfig t = base;
        t.mode = TruncationMode::fixed;
        t.fixed_tau = tau;
        truncations.emplace_back("tau-fixed-" + short_num(tau), t);
    }
    TruncationConfig scaled_t = base;
    scaled_t.mode = TruncationMode::action_scaled;
    truncations.emplace_back("tau-scaled", scaled_t);
    TruncationConfig off = base;
    off.mode = TruncationMode::off;
    truncations.emplace_back("tau-off", off);

    std::vector<Variant> out;
    for (const auto& [gname, g] : guidances)
        for (const auto& [tname, t] : truncations) out.push_back({gname + "_" + tname, g, t});
    return out;
}

const VariantSummary& ExperimentReport::variant_summary(const std::string& name) const {
    for (const auto& s : summary)
        if (s.name == name) return s;
    throw InvalidInput("report has no variant named " + name);
}

std::string ExperimentReport::csv() const {
    std::string out = "episode,variant,psnr,ssim,latent_l2,denoiser_evals,guided_steps,status\n";
    for (const auto& r : rows) {
        out += std::to_string(r.episode) + "," + variants[r.variant].name + "," + num(r.psnr) + "," + num(r.ssim) +
               "," + num(r.latent_l2) + "," + std::to_string(r.denoiser_evaluations) + "," +
               std::to_string(r.guided_steps) + "," + r.status + "\n";
    }
    return out;
}

nlohmann::json ExperimentReport::aggregate_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["config"] = config_text;
    j["mu_act"] = mu_act;
    j["wall_clock_seconds"] = wall_clock_seconds;
    j["variants"] = nlohmann::json::array();
    for (const auto& s : summary) {
        j["variants"].push_back({{"name", s.name},
                                 {"mean_psnr", s.mean_psnr},
                                 {"mean_ssim", s.mean_ssim},
                                 {"mean_latent_l2", s.mean_latent_l2},
                                 {"episodes", s.episodes},
                                 {"failures", s.failures},
                                 {"denoiser_evaluations", s.denoiser_evaluations}});
    }
    return j;
}

void ExperimentReport::write(const std::string& csv_path, const std::string& json_path) const {
    {
        std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + csv_path);
        out << csv();
    }
    std::ofstream out(json_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + json_path);
    out << aggregate_json().dump(2) << "\n";
}

ExperimentReport run_variant_grid(const Denoiser& model, const DiffusionSchedule& sched,
                                  const std::vector<Episode>& episodes, const std::vector<Variant>& variants,
                                  const EvaluationOptions& options) {
    const auto started = std::chrono::steady_clock::now();
    if (variants.empty()) throw InvalidInput("no variants to evaluate");
    std::vector<const Episode*> selected;
    for (const auto& ep : episodes) {
        if (options.episodes.empty() ||
            std::find(options.episodes.begin(), options.episodes.end(), ep.index) != options.episodes.end())
            selected.push_back(&ep);
    }
    if (selected.empty()) throw InvalidInput("no episodes selected for evaluation");
    std::sort(selected.begin(), selected.end(), [](const Episode* a, const Episode* b) { return a->index < b->index; });
    const int passes = options.rollout == RolloutMode::long_trajectory ? options.long_passes : 1;

    ExperimentReport report;
    report.variants = variants;
    report.rows.resize(selected.size() * variants.size());

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t e = next.fetch_add(1);
            if (e >= selected.size()) return;
            const Episode& ep = *selected[e];
            try {
                for (std::size_t v = 0; v < variants.size(); ++v) {
                    EpisodeRow& row = report.rows[e * variants.size() + v];
                    row.episode = ep.index;
                    row.variant = v;
                    RolloutControls controls{variants[v].guidance, variants[v].truncation, options.sampler};
                    Rng rng = make_rng(options.seed, ep.index);
                    RolloutStats stats;
                    try {
                        std::vector<Frame> frames = rollout_long(model, sched, ep, passes, controls, rng, &stats);
                        score_row(row, frames, ep);
                        if (options.keep_frames) row.frames = std::move(frames);
                    } catch (const NumericalError&) {
                        row.status = "numerical_failure";
                        row.psnr = row.ssim = row.latent_l2 = std::nan("");
                    }
                    row.denoiser_evaluations = stats.denoiser_evaluations;
                    row.guided_steps = stats.guided_steps;
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = selected.size();
                return;
            }
        }
    };
    const int n_workers = std::max(1, std::min<int>(options.workers, static_cast<int>(selected.size())));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    for (std::size_t v = 0; v < variants.size(); ++v) {
        VariantSummary s;
        s.name = variants[v].name;
        for (const auto& row : report.rows) {
            if (row.variant != v) continue;
            s.denoiser_evaluations += row.denoiser_evaluations;
            if (row.status != "ok") {
                ++s.failures;
                continue;
            }
            ++s.episodes;
            s.mean_psnr += row.psnr;
            s.mean_ssim += row.ssim;
            s.mean_latent_l2 += row.latent_l2;
        }
        if (s.episodes > 0) {
            s.mean_psnr /= s.episodes;
            s.mean_ssim /= s.episodes;
            s.mean_latent_l2 /= s.episodes;
        }
        report.summary.push_back(s);
    }
    report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

EvaluationOptions evaluation_options(const ExperimentConfig& cfg) {
    EvaluationOptions o;
    o.rollout = cfg.rollout;
    o.long_passes = cfg.long_passes;
    o.sampler = cfg.sampler;
    o.seed = cfg.seed;
    o.workers = cfg.workers;
    if (cfg.eval_episodes > 0)
        for (int i = 0; i < cfg.eval_episodes; ++i) o.episodes.push_back(static_cast<std::uint32_t>(i));
    return o;
}

double resolve_mu_act(const ExperimentConfig& cfg, const std::vector<Episode>& train) {
    if (cfg.mu_act) return *cfg.mu_act;
    const auto actions = all_actions(train);
    return empirical_mean_action_norm(actions);
}

std::vector<std::string> cmd_gen_dataset(const ExperimentConfig& cfg) {
    cfg.validate();
    ensure_output_dir(cfg);
    const DatasetSplits splits = make_splits(cfg);
    std::vector<std::string> written;
    const std::pair<const char*, const std::vector<Episode>*> parts[] = {
        {"train", &splits.train}, {"val", &splits.val}, {"test", &splits.test}};
    int split = 0;
    for (const auto& [name, eps] : parts) {
        const std::string p = cfg.path(std::string(name) + ".tds");
        save_dataset(p, *eps, cfg.split_seed(split++));
        written.push_back(p);
    }
    return written;
}

TrainResult cmd_train(const ExperimentConfig& cfg, const TrainProgress& progress) {
    cfg.validate();
    ensure_output_dir(cfg);
    const auto train_split = load_split(cfg, "train");
    TrainResult result = train(train_split, cfg.schedule(), cfg.train, progress);
    save_checkpoint(result.params, cfg.path("model.ckpt"));

    std::ofstream curve(cfg.path("loss_curve.csv"), std::ios::trunc);
    if (!curve) throw IoError("cannot write " + cfg.path("loss_curve.csv"));
    curve << "step,loss\n";
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i) curve << i << "," << num(result.loss_curve[i]) << "\n";

    ExperimentConfig resolved = cfg;
    resolved.mu_act = resolve_mu_act(cfg, train_split);
    std::ofstream echo(cfg.path("resolved_config.txt"), std::ios::trunc);
    echo << resolved.to_text();
    return result;
}

namespace {

ExperimentReport run_grid_command(const ExperimentConfig& cfg, const char* command, bool ablation) {
    cfg.validate();
    ensure_output_dir(cfg);
    const double mu_act = cfg.mu_act ? *cfg.mu_act : resolve_mu_act(cfg, load_split(cfg, "train"));
    const auto test = load_split(cfg, "test");
    const auto sched = cfg.schedule();
    const MlpDenoiser model(load_model(cfg), sched);
    const auto variants = ablation ? ablation_variants(cfg, mu_act) : evaluation_variants(cfg, mu_act);
    ExperimentReport report = run_variant_grid(model, sched, test, variants, evaluation_options(cfg));
    report.command = command;
    report.config_text = cfg.to_text();
    report.mu_act = mu_act;
    report.write(cfg.path(std::string(command) + ".csv"), cfg.path(std::string(command) + ".json"));
    return report;
}

}  // namespace

ExperimentReport cmd_evaluate(const ExperimentConfig& cfg) { return run_grid_command(cfg, "evaluate", false); }

ExperimentReport cmd_ablate(const ExperimentConfig& cfg) { return run_grid_command(cfg, "ablate", true); }

void write_pgm_strip(const std::string& path, const std::vector<Frame>& frames, int scale) {
    if (frames.empty()) throw InvalidInput("no frames to write");
    if (scale < 1) throw InvalidInput("scale must be >= 1");
    const int h = kFrameSide * scale;
    const int w = kFrameSide * scale * static_cast<int>(frames.size());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << "P5\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(w));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Frame& f = frames[static_cast<std::size_t>(x / (kFrameSide * scale))];
            const float v = f.at(y / scale, (x / scale) % kFrameSide);
            row[static_cast<std::size_t>(x)] = static_cast<unsigned char>(std::lround(v * 255.0f));
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
}

std::vector<std::string> cmd_dump_frames(const ExperimentConfig& cfg, const std::vector<std::uint32_t>& episode_ids,
                                         int scale) {
    cfg.validate();
    if (episode_ids.empty()) throw InvalidInput("dump-frames needs at least one episode id");
    const double mu_act = cfg.mu_act ? *cfg.mu_act : resolve_mu_act(cfg, load_split(cfg, "train"));
    const auto test = load_split(cfg, "test");
    for (auto id : episode_ids)
        if (id >= test.size()) throw InvalidInput("episode " + std::to_string(id) + " is not in the test split");
    const auto sched = cfg.schedule();
    const MlpDenoiser model(load_model(cfg), sched);
    EvaluationOptions options = evaluation_options(cfg);
    options.episodes = episode_ids;
    options.keep_frames = true;
    const auto variants = evaluation_variants(cfg, mu_act);
    const ExperimentReport report = run_variant_grid(model, sched, test, variants, options);

    const std::filesystem::path dir = std::filesystem::path(cfg.output_dir) / "frames";
    std::filesystem::create_directories(dir);
    std::vector<std::string> written;
    char stem[32];
    for (const auto& row : report.rows) {
        std::snprintf(stem, sizeof stem, "ep%04u_", row.episode);
        if (row.variant == 0) {
            const Episode& ep = test[row.episode];
            std::vector<Frame> truth(ep.frames.begin() + 1,
                                     ep.frames.begin() + 1 + static_cast<std::ptrdiff_t>(row.frames.size()));
            const std::string p = (dir / (std::string(stem) + "ground_truth.pgm")).string();
            write_pgm_strip(p, truth, scale);
            written.push_back(p);
        }
        if (row.frames.empty()) continue;
        const std::string p = (dir / (std::string(stem) + variants[row.variant].name + ".pgm")).string();
        write_pgm_strip(p, row.frames, scale);
        written.push_back(p);
    }
    return written;
}

std::vector<OracleCheck> cmd_oracle_check(std::uint64_t seed) {
    const GaussianWorld world = GaussianWorld::default_world();
    const DiffusionSchedule sched = make_schedule(100, 1e-3, 0.2);
    Rng rng = make_rng(seed, 0x0c1e);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_int_distribution<int> step(1, sched.steps);
    std::uniform_real_distribution<double> omega_dist(0.0, 5.0);
    auto random_vec = [&](std::size_t n, double scale) {
        std::vector<double> v(n);
        for (double& x : v) x = scale * unit(rng);
        return v;
    };
    std::vector<OracleCheck> out;

    {
        OracleCheck c{"guided epsilon equals amplified-action epsilon", true, 0.0, 1e-9};
        for (int i = 0; i < 1000; ++i) {
            const auto x = random_vec(4, 3.0);
            const ActionVector a(random_vec(2, 3.0));
            const auto r = guided_equals_amplified_check(x, step(rng), a, omega_dist(rng), world, sched, c.threshold);
            c.measured = std::max(c.measured, r.max_residual);
        }
        c.passed = c.measured <= c.threshold;
        out.push_back(c);
    }
    {
        // eps* = -sqrt(1 - ab) * grad log p(x_t | a), gradient by central differences.
        OracleCheck c{"closed-form epsilon matches finite-difference score", true, 0.0, 1e-5};
        for (int i = 0; i < 100; ++i) {
            const auto x = random_vec(4, 3.0);
            const ActionVector a(random_vec(2, 3.0));
            const int t = step(rng);
            const double ab = sched.alpha_bar_at(t);
            const double var = ab * world.sigma0 * world.sigma0 + 1.0 - ab;
            const auto mu = world.mean(a);
            auto log_density = [&](const std::vector<double>& p) {
                double q = 0.0;
                for (std::size_t k = 0; k < p.size(); ++k) q += (p[k] - std::sqrt(ab) * mu[k]) * (p[k] - std::sqrt(ab) * mu[k]);
                return -0.5 * q / var - 0.5 * static_cast<double>(p.size()) * std::log(2.0 * M_PI * var);
            };
            const auto eps = exact_epsilon(x, t, a, world, sched);
            double diff = 0.0;
            double norm = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k) {
                const double h = 1e-5;
                auto up = x;
                auto dn = x;
                up[k] += h;
                dn[k] -= h;
                const double fd = -std::sqrt(1.0 - ab) * (log_density(up) - log_density(dn)) / (2.0 * h);
                diff += (fd - eps[k]) * (fd - eps[k]);
                norm += eps[k] * eps[k];
            }
            c.measured = std::max(c.measured, std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12));
        }
        c.passed = c.measured <= c.threshold;
        out.push_back(c);
    }
    {
        OracleCheck c{"deterministic sampler recovers W a as sigma0 -> 0", true, 0.0, 1e-6};
        GaussianWorld sharp = world;
        sharp.sigma0 = 1e-12;
        const GaussianOracleDenoiser den(sharp, sched);
        SamplerOptions opts{SamplerKind::deterministic, false, 3.0};
        for (int i = 0; i < 20; ++i) {
            const ActionVector a(random_vec(2, 3.0));
            const auto res = sample(den, {nullptr, a}, std::vector<double>(4, 0.0), sched, {}, rng, opts);
            const auto mu = sharp.mean(a);
            for (std::size_t k = 0; k < mu.size(); ++k) c.measured = std::max(c.measured, std::abs(res.x0[k] - mu[k]));
        }
        c.passed = c.measured <= c.threshold;
        out.push_back(c);
    }
    {
        OracleCheck c{"zero action: action-scaled guidance is bit-identical to none", true, 0.0, 0.0};
        const GaussianOracleDenoiser den(world, sched);
        GuidanceConfig scaled{GuidanceMode::action_scaled};
        const auto z0 = random_vec(4, 1.0);
        Rng r1 = make_rng(seed, 1);
        Rng r2 = make_rng(seed, 1);
        const auto a = ActionVector::zero(2);
        const auto off = sample(den, {nullptr, a}, z0, sched, {}, r1, {SamplerKind::ancestral, false, 3.0});
        const auto on = sample(den, {nullptr, a}, z0, sched, scaled, r2, {SamplerKind::ancestral, false, 3.0});
        c.passed = off.x0 == on.x0;
        c.measured = c.passed ? 0.0 : 1.0;
        out.push_back(c);
    }
    {
        OracleCheck c{"ancestral sample mean within 3 standard errors of W a", true, 0.0, 3.0};
        const GaussianOracleDenoiser den(world, sched);
        const ActionVector a{0.8, -0.6};
        const int n = 4000;
        std::vector<double> sum(4, 0.0), sum_sq(4, 0.0);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int i = 0; i < n; ++i) {
            std::vector<double> z0(4);
            for (double& v : z0) v = normal(rng);
            const auto res = sample(den, {nullptr, a}, std::move(z0), sched, {}, rng, {SamplerKind::ancestral, false, 3.0});
            for (std::size_t k = 0; k < 4; ++k) {
                sum[k] += res.x0[k];
                sum_sq[k] += res.x0[k] * res.x0[k];
            }
        }
        const auto mu = world.mean(a);
        for (std::size_t k = 0; k < 4; ++k) {
            const double mean = sum[k] / n;
            const double var = sum_sq[k] / n - mean * mean;
            c.measured = std::max(c.measured, std::abs(mean - mu[k]) / std::sqrt(var / n));
        }
        c.passed = c.measured <= c.threshold;
        out.push_back(c);
    }
    return out;
}

}  // namespace actguide
