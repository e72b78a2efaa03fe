// Acceptance run: one PASS/FAIL line per criterion. Trains the reference model
// into --workdir the first time and reuses it while the config is unchanged.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <CLI11.hpp>

#include "actguide/config.hpp"
#include "actguide/error.hpp"
#include "actguide/gaussian_oracle.hpp"
#include "actguide/guidance.hpp"
#include "actguide/harness.hpp"
#include "actguide/metrics.hpp"
#include "actguide/mlp.hpp"
#include "actguide/truncation.hpp"

using namespace actguide;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void verdict(int id, const std::string& title, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s -- %s\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Runs one check, turning an unexpected exception into a failure line.
void guarded(int id, const std::string& title, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        verdict(id, title, false, std::string("threw: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Closed forms written out here, independent of the library.

double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::acos(-1.0)); }
double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

struct Marginal {
    std::vector<double> mean;
    double var;
};

// x_t | a in the linear-Gaussian world: N(sqrt(ab) W a, (ab s0^2 + 1 - ab) I).
Marginal marginal(const GaussianWorld& w, const ActionVector& a, double ab) {
    Marginal m{std::vector<double>(static_cast<std::size_t>(w.out_dim), 0.0), ab * w.sigma0 * w.sigma0 + 1.0 - ab};
    for (int i = 0; i < w.out_dim; ++i)
        for (int j = 0; j < w.action_dim; ++j)
            m.mean[static_cast<std::size_t>(i)] +=
                std::sqrt(ab) * w.weights[static_cast<std::size_t>(i * w.action_dim + j)] * a[static_cast<std::size_t>(j)];
    return m;
}

double log_density(const Marginal& m, const std::vector<double>& x) {
    double q = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) q += (x[i] - m.mean[i]) * (x[i] - m.mean[i]);
    return -0.5 * q / m.var - 0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::acos(-1.0) * m.var);
}

std::vector<double> oracle_epsilon(const GaussianWorld& w, const std::vector<double>& x, const ActionVector& a,
                                   double ab) {
    const Marginal m = marginal(w, a, ab);
    std::vector<double> e(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) e[i] = std::sqrt(1.0 - ab) * (x[i] - m.mean[i]) / m.var;
    return e;
}

double naive_ssim(const Frame& x, const Frame& y) {
    const double c1 = 1e-4, c2 = 9e-4;
    double total = 0.0;
    int windows = 0;
    for (int r = 0; r + 8 <= 16; ++r)
        for (int c = 0; c + 8 <= 16; ++c) {
            double mx = 0, my = 0;
            for (int i = 0; i < 8; ++i)
                for (int j = 0; j < 8; ++j) {
                    mx += x.at(r + i, c + j);
                    my += y.at(r + i, c + j);
                }
            mx /= 64;
            my /= 64;
            double vx = 0, vy = 0, cxy = 0;
            for (int i = 0; i < 8; ++i)
                for (int j = 0; j < 8; ++j) {
                    const double dx = x.at(r + i, c + j) - mx, dy = y.at(r + i, c + j) - my;
                    vx += dx * dx;
                    vy += dy * dy;
                    cxy += dx * dy;
                }
            vx /= 64;
            vy /= 64;
            cxy /= 64;
            total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++windows;
        }
    return total / windows;
}

// ---------------------------------------------------------------------------

void criterion_guidance_identity() {
    const auto t0 = Clock::now();
    const GaussianWorld world = GaussianWorld::default_world();
    const auto sched = make_schedule(100, 1e-3, 0.2);
    Rng rng = make_rng(2024, 1);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_int_distribution<int> pick_t(1, sched.steps);
    std::uniform_real_distribution<double> pick_w(0.0, 5.0);
    double worst = 0.0;
    for (int probe = 0; probe < 1000; ++probe) {
        std::vector<double> x(4);
        for (double& v : x) v = 2.0 * n(rng);
        const ActionVector a{2.0 * n(rng), 2.0 * n(rng)};
        const int t = pick_t(rng);
        const double omega = pick_w(rng);
        const auto pos = exact_epsilon(x, t, a, world, sched);
        const auto neg = exact_epsilon(x, t, negate_action(a), world, sched);
        const auto guided = guided_epsilon(pos, neg, omega, GuidanceParameterization::conditional_anchor);
        const auto amplified = oracle_epsilon(world, x, a.scaled(1.0 + 2.0 * omega), sched.alpha_bar_at(t));
        for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(guided[i] - amplified[i]));
    }
    const double secs = seconds_since(t0);
    verdict(1, "exact guidance identity", worst <= 1e-9 && secs < 1.0,
            fmt("max residual %.3g over 1000 probes (bound 1e-9), %.3f s", worst, secs));
}

void criterion_oracle_score() {
    const auto t0 = Clock::now();
    const GaussianWorld world = GaussianWorld::default_world();
    const auto sched = make_schedule(100, 1e-3, 0.2);
    Rng rng = make_rng(2024, 2);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_int_distribution<int> pick_t(1, sched.steps);
    double worst = 0.0;
    for (int probe = 0; probe < 100; ++probe) {
        std::vector<double> x(4);
        for (double& v : x) v = 1.5 * n(rng);
        const ActionVector a{n(rng), n(rng)};
        const int t = pick_t(rng);
        const double ab = sched.alpha_bar_at(t);
        const Marginal m = marginal(world, a, ab);
        const auto eps = exact_epsilon(x, t, a, world, sched);
        double err = 0.0, ref = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double h = 1e-4 * std::max(1.0, std::abs(x[i]));
            auto xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            const double score = (log_density(m, xp) - log_density(m, xm)) / (2.0 * h);
            const double target = -std::sqrt(1.0 - ab) * score;
            err += (eps[i] - target) * (eps[i] - target);
            ref += target * target;
        }
        worst = std::max(worst, std::sqrt(err / ref));
    }
    const double secs = seconds_since(t0);
    verdict(2, "oracle score correctness", worst <= 1e-5 && secs < 1.0,
            fmt("max relative error %.3g over 100 probes (bound 1e-5), %.3f s", worst, secs));
}

void criterion_truncated_normal() {
    const auto t0 = Clock::now();
    bool ok = true;
    std::string detail;
    for (double tau : {0.5, 1.0, 1.5}) {
        Rng rng = make_rng(2024, static_cast<std::uint64_t>(tau * 10));
        const std::size_t n = 1'000'000;
        const auto z = sample_truncated_normal(tau, n, rng);
        double max_abs = 0.0, s1 = 0.0, s2 = 0.0, s4 = 0.0;
        for (double v : z) {
            max_abs = std::max(max_abs, std::abs(v));
            s1 += v;
            s2 += v * v;
            s4 += v * v * v * v;
        }
        const double mean = s1 / n;
        const double m2 = s2 / n;
        const double var = m2 - mean * mean;
        const double closed = 1.0 - 2.0 * tau * phi(tau) / (2.0 * Phi(tau) - 1.0);
        const double se_var = std::sqrt((s4 / n - m2 * m2) / n);
        const double se_mean = std::sqrt(var / n);
        const bool this_ok = z.size() == n && max_abs <= tau && std::abs(var - closed) <= 3.0 * se_var &&
                             std::abs(mean) <= 3.0 * se_mean;
        ok = ok && this_ok;
        detail += fmt("tau=%.1f: max|z| %.6f, var %.6f vs %.6f (%.2f se), mean %.2e (%.2f se); ", tau, max_abs, var,
                      closed, std::abs(var - closed) / se_var, mean, std::abs(mean) / se_mean);
    }
    const double secs = seconds_since(t0);
    ok = ok && secs < 5.0;
    verdict(3, "truncated-normal statistics", ok, detail + fmt("%.2f s", secs));
}

void criterion_tau_schedule(double mu_act) {
    bool ok = true;
    std::string detail;
    for (double mu : {mu_act, 0.5, 2.5}) {
        TruncationConfig cfg;
        cfg.mode = TruncationMode::action_scaled;
        cfg.mu_act = mu;
        ok = ok && truncation_limit(mu, cfg) == 1.0;
        Rng rng = make_rng(2024, 4);
        std::uniform_real_distribution<double> u(0.0, kActionLimit * std::sqrt(2.0));
        std::vector<double> norms(10'000);
        for (double& v : norms) v = u(rng);
        std::sort(norms.begin(), norms.end());
        double lo = 2.0, hi = 0.0;
        int non_increasing = 0;
        double prev_norm = -1.0, prev_tau = 0.0;
        for (double v : norms) {
            const double tau = truncation_limit(v, cfg);
            lo = std::min(lo, tau);
            hi = std::max(hi, tau);
            if (prev_norm >= 0.0 && v > prev_norm && !(tau > prev_tau)) ++non_increasing;
            prev_norm = v;
            prev_tau = tau;
        }
        ok = ok && non_increasing == 0 && lo > 0.5 && hi < 1.5;
        if (!detail.empty()) detail += "; ";
        detail += fmt("mu=%.4f: tau(mu)=%.17g, range (%.4f, %.4f), %d monotonicity violations", mu,
                      truncation_limit(mu, cfg), lo, hi, non_increasing);
    }
    verdict(4, "tau schedule", ok, detail);
}

void criterion_zero_action(const MlpDenoiser& model, const DiffusionSchedule& sched, const std::vector<Episode>& test,
                           double mu_act) {
    std::vector<Episode> still;
    for (std::uint32_t i = 0; i < 10; ++i) {
        Episode ep;
        ep.index = i;
        ep.positions.assign(16, test[i].positions[0]);
        ep.frames.assign(16, test[i].frames[0]);
        ep.actions.assign(15, ActionVector::zero(2));
        still.push_back(std::move(ep));
    }
    ExperimentConfig cfg;
    const auto variants = evaluation_variants(cfg, mu_act);
    EvaluationOptions opts;
    opts.keep_frames = true;
    opts.sampler.kind = SamplerKind::deterministic;
    const auto rep = run_variant_grid(model, sched, still, {variants[0], variants[1]}, opts);
    int identical = 0, guided = 0;
    for (std::size_t e = 0; e < still.size(); ++e) {
        const auto& base = rep.rows[2 * e];
        const auto& cfgrow = rep.rows[2 * e + 1];
        identical += base.frames == cfgrow.frames && !base.frames.empty();
        guided += cfgrow.guided_steps;
    }
    verdict(5, "zero-action end-to-end identity", identical == 10 && guided == 0,
            fmt("%d/10 episodes bit-identical to the unguided pipeline, %d guided steps", identical, guided));
}

void criterion_diversity(const MlpDenoiser& model, const DiffusionSchedule& sched, const Episode& episode) {
    const auto t0 = Clock::now();
    auto pixel_variance = [&](const TruncationConfig& trunc) {
        RolloutControls controls;
        controls.truncation = trunc;
        controls.sampler.kind = SamplerKind::deterministic;
        const int runs = 100;
        std::vector<double> sum(15 * kFramePixels, 0.0), sum_sq(15 * kFramePixels, 0.0);
        for (int r = 0; r < runs; ++r) {
            Rng rng = make_rng(77, static_cast<std::uint64_t>(r));
            const auto frames = rollout_short(model, sched, episode, controls, rng);
            for (std::size_t k = 0; k < frames.size(); ++k)
                for (std::size_t p = 0; p < kFramePixels; ++p) {
                    const double v = frames[k].pixels()[p];
                    sum[k * kFramePixels + p] += v;
                    sum_sq[k * kFramePixels + p] += v * v;
                }
        }
        double total = 0.0;
        for (std::size_t i = 0; i < sum.size(); ++i) {
            const double m = sum[i] / runs;
            total += sum_sq[i] / runs - m * m;
        }
        return total / static_cast<double>(sum.size());
    };
    TruncationConfig off;
    TruncationConfig tight;
    tight.mode = TruncationMode::fixed;
    tight.fixed_tau = 0.5;
    const double v_off = pixel_variance(off);
    const double v_tight = pixel_variance(tight);
    const double secs = seconds_since(t0);
    verdict(6, "diversity control", v_tight < v_off && secs < 120.0,
            fmt("mean per-pixel variance tau=0.5 %.4g vs untruncated %.4g (ratio %.4f), %.1f s", v_tight, v_off,
                v_tight / v_off, secs));
}

void criterion_gradient(const MlpParams& params, const std::vector<Episode>& train, const DiffusionSchedule& sched) {
    Rng rng = make_rng(2024, 7);
    const TrainingBatch batch = draw_batch(train, sched, 8, ExperimentConfig{}.train.snr_cap, rng);
    MlpParams grad;
    loss_and_gradient(params, batch.inputs, batch.targets, batch.weights, &grad);

    // Flat views over parameters and gradient in the same order.
    std::vector<double*> p_ptr;
    std::vector<double> g;
    MlpParams work = params;
    for (std::size_t l = 0; l < work.layers.size(); ++l) {
        for (Eigen::Index k = 0; k < work.layers[l].weight.size(); ++k) {
            p_ptr.push_back(work.layers[l].weight.data() + k);
            g.push_back(grad.layers[l].weight.data()[k]);
        }
        for (Eigen::Index k = 0; k < work.layers[l].bias.size(); ++k) {
            p_ptr.push_back(work.layers[l].bias.data() + k);
            g.push_back(grad.layers[l].bias.data()[k]);
        }
    }
    auto loss = [&] { return loss_and_gradient(work, batch.inputs, batch.targets, batch.weights, nullptr); };

    // Coordinates: the 256 largest gradient entries plus 256 random ones.
    std::vector<std::size_t> order(g.size());
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + 256, order.end(),
                      [&](std::size_t a, std::size_t b) { return std::abs(g[a]) > std::abs(g[b]); });
    std::vector<std::size_t> coords(order.begin(), order.begin() + 256);
    std::uniform_int_distribution<std::size_t> any(0, g.size() - 1);
    std::vector<std::size_t> random_coords;
    for (int i = 0; i < 256; ++i) random_coords.push_back(any(rng));

    double worst_top = 0.0;
    for (std::size_t i : coords) {
        const double saved = *p_ptr[i];
        const double h = 1e-5 * std::max(1.0, std::abs(saved));
        *p_ptr[i] = saved + h;
        const double up = loss();
        *p_ptr[i] = saved - h;
        const double down = loss();
        *p_ptr[i] = saved;
        const double fd = (up - down) / (2 * h);
        worst_top = std::max(worst_top, std::abs(fd - g[i]) / std::max(std::abs(fd), std::abs(g[i])));
    }
    // Random coordinates may have vanishing gradients; compare against the
    // gradient scale instead of the entry itself.
    const double g_scale = std::abs(g[coords.front()]);
    double worst_random = 0.0;
    for (std::size_t i : random_coords) {
        const double saved = *p_ptr[i];
        const double h = 1e-5 * std::max(1.0, std::abs(saved));
        *p_ptr[i] = saved + h;
        const double up = loss();
        *p_ptr[i] = saved - h;
        const double down = loss();
        *p_ptr[i] = saved;
        const double fd = (up - down) / (2 * h);
        worst_random = std::max(worst_random, std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), g_scale}));
    }
    // Random directions through the whole parameter vector.
    std::normal_distribution<double> n(0.0, 1.0);
    double worst_dir = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> dir(g.size());
        double analytic = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            dir[i] = n(rng);
            analytic += dir[i] * g[i];
        }
        std::vector<double> saved(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) saved[i] = *p_ptr[i];
        const double h = 1e-6;
        for (std::size_t i = 0; i < g.size(); ++i) *p_ptr[i] = saved[i] + h * dir[i];
        const double up = loss();
        for (std::size_t i = 0; i < g.size(); ++i) *p_ptr[i] = saved[i] - h * dir[i];
        const double down = loss();
        for (std::size_t i = 0; i < g.size(); ++i) *p_ptr[i] = saved[i];
        const double fd = (up - down) / (2 * h);
        worst_dir = std::max(worst_dir, std::abs(fd - analytic) / std::max(std::abs(fd), std::abs(analytic)));
    }
    const bool ok = worst_top <= 1e-4 && worst_random <= 1e-4 && worst_dir <= 1e-4;
    verdict(7, "gradient correctness", ok,
            fmt("8-sample batch, %zu parameters: max rel. error %.2g (256 largest entries), %.2g (256 random entries, "
                "scaled), %.2g (20 random directions); bound 1e-4",
                g.size(), worst_top, worst_random, worst_dir));
}

int run_cli(const std::string& cli, const std::string& args) {
    const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    std::string workdir = "acceptance_run";
    std::string cli = ACTGUIDE_CLI_PATH;
    int workers = 1;
    app.add_option("--workdir", workdir, "Directory for the reference run (reused across invocations)");
    app.add_option("--cli", cli, "Path to the actguide executable");
    app.add_option("--workers", workers, "Evaluation worker threads");
    CLI11_PARSE(app, argc, argv);

    const auto started = Clock::now();
    guarded(1, "exact guidance identity", criterion_guidance_identity);
    guarded(2, "oracle score correctness", criterion_oracle_score);
    guarded(3, "truncated-normal statistics", criterion_truncated_normal);
    guarded(11, "metric oracles", [] {
        const Frame a = Frame::from_pixels(std::vector<double>(kFramePixels, 0.25));
        const Frame b = Frame::from_pixels(std::vector<double>(kFramePixels, 0.15));
        const double exact = psnr_from_mse(0.01);
        const double frames = psnr(a, b);
        Rng rng = make_rng(2024, 11);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double worst = 0.0;
        bool identical_one = true;
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> px(kFramePixels), py(kFramePixels);
            for (auto& v : px) v = u(rng);
            for (auto& v : py) v = u(rng);
            const Frame x = Frame::from_pixels(px), y = Frame::from_pixels(py);
            worst = std::max(worst, std::abs(ssim(x, y) - naive_ssim(x, y)));
            identical_one = identical_one && ssim(x, x) == 1.0;
        }
        const bool ok = exact == 20.0 && std::abs(frames - 20.0) < 1e-6 && identical_one && worst <= 1e-9;
        verdict(11, "metric oracles", ok,
                fmt("psnr at MSE 0.01 = %.17g, on float frames %.9f; ssim(x,x)==1 on 50 frames: %s; "
                    "max |ssim - naive| %.3g over 50 random pairs",
                    exact, frames, identical_one ? "yes" : "no", worst));
    });

    // Reference run: default config, cached in the workdir.
    ExperimentConfig cfg;
    cfg.output_dir = workdir;
    cfg.workers = workers;
    fs::create_directories(workdir);
    const fs::path stamp = fs::path(workdir) / "reference_config.txt";
    ExperimentConfig stamp_cfg = cfg;
    stamp_cfg.workers = 1;
    const std::string stamp_text = stamp_cfg.to_text();
    double train_secs = -1.0;
    bool cached = false;
    try {
        cached = fs::exists(stamp) && slurp(stamp) == stamp_text && fs::exists(cfg.path("model.ckpt")) &&
                 fs::exists(cfg.path("loss_curve.csv")) && fs::exists(cfg.path("test.tds"));
        if (!cached) {
            fs::remove(stamp);
            std::printf("training the reference model (%d steps); this takes a few minutes\n", cfg.train.steps);
            std::fflush(stdout);
            const auto t0 = Clock::now();
            cmd_gen_dataset(cfg);
            cmd_train(cfg);
            train_secs = seconds_since(t0);
            std::ofstream(stamp) << stamp_text;
        }
    } catch (const std::exception& e) {
        std::printf("reference run failed: %s\n", e.what());
        for (int id : {4, 5, 6, 7, 8, 9, 10}) verdict(id, "needs the reference run", false, "reference run failed");
        return 1;
    }

    const auto train_split = load_dataset(cfg.path("train.tds"));
    const auto test_split = load_dataset(cfg.path("test.tds"));
    const double mu_act = resolve_mu_act(cfg, train_split);
    const auto sched = cfg.schedule();
    const MlpParams params = load_checkpoint(cfg.path("model.ckpt"), cfg.train.layer_dims);
    const MlpDenoiser model(params, sched);

    {
        // Pinned regression bound on the reference loss curve.
        std::ifstream in(cfg.path("loss_curve.csv"));
        std::string line;
        std::getline(in, line);
        std::vector<double> curve;
        while (std::getline(in, line)) curve.push_back(std::stod(line.substr(line.find(',') + 1)));
        if (curve.size() > 5000) {
            auto window = [&](std::size_t end) {
                double s = 0.0;
                for (std::size_t i = end - 100; i < end; ++i) s += curve[i];
                return s / 100.0;
            };
            std::printf("reference training: loss %.4f at step 0, %.4f at step 5000 (mean of steps 4900-4999 %.4f), "
                        "%.4f at the end; %s\n",
                        curve[0], curve[5000], window(5000), curve.back(),
                        window(5000) < 0.5 * curve[0] ? "below half the initial loss" : "NOT below half the initial loss");
        }
        if (train_secs >= 0) std::printf("reference training took %.1f s\n", train_secs);
        else std::printf("reference model reused from %s\n", workdir.c_str());
    }

    guarded(4, "tau schedule", [&] { criterion_tau_schedule(mu_act); });
    guarded(5, "zero-action end-to-end identity", [&] { criterion_zero_action(model, sched, test_split, mu_act); });
    guarded(6, "diversity control", [&] { criterion_diversity(model, sched, test_split.at(0)); });
    guarded(7, "gradient correctness", [&] { criterion_gradient(params, train_split, sched); });

    ExperimentReport short_report;
    guarded(8, "baseline vs guidance and truncation", [&] {
        const auto t0 = Clock::now();
        short_report = cmd_evaluate(cfg);
        const double secs = seconds_since(t0) + std::max(0.0, train_secs);
        const auto& base = short_report.variant_summary("baseline");
        const auto& mid = short_report.variant_summary("cfg");
        const auto& full = short_report.variant_summary("cfg_trunc");
        const bool ok = base.episodes >= 200 && base.failures == 0 && full.failures == 0 &&
                        base.mean_latent_l2 > full.mean_latent_l2 && base.mean_psnr < full.mean_psnr &&
                        secs <= 900.0;
        verdict(8, "baseline vs guidance and truncation", ok,
                fmt("%d episodes; latent-L2 baseline %.5f, +cfg %.5f, +cfg&trunc %.5f; PSNR baseline %.4f, +cfg %.4f, "
                    "+cfg&trunc %.4f; %.1f s%s",
                    base.episodes, base.mean_latent_l2, mid.mean_latent_l2, full.mean_latent_l2, base.mean_psnr,
                    mid.mean_psnr, full.mean_psnr, secs, train_secs < 0 ? " (training time not included: cached)" : ""));
    });

    guarded(9, "long-trajectory degradation", [&] {
        if (short_report.rows.empty()) throw InvalidInput("short-trajectory evaluation missing");
        const auto t0 = Clock::now();
        EvaluationOptions opts = evaluation_options(cfg);
        opts.rollout = RolloutMode::long_trajectory;
        opts.long_passes = 3;
        const auto long_report = run_variant_grid(model, sched, test_split, short_report.variants, opts);
        const double secs = seconds_since(t0);
        bool ok = secs <= 600.0;
        std::string detail;
        for (const auto& s : short_report.summary) {
            const auto& l = long_report.variant_summary(s.name);
            ok = ok && l.failures == 0 && l.mean_psnr < s.mean_psnr;
            detail += fmt("%s: short %.4f dB, K=3 %.4f dB; ", s.name.c_str(), s.mean_psnr, l.mean_psnr);
        }
        verdict(9, "long-trajectory degradation", ok, detail + fmt("%.1f s", secs));
    });

    guarded(10, "reproducibility", [&] {
        const fs::path dir = fs::path(workdir) / "repro";
        fs::create_directories(dir);
        for (const char* f : {"train.tds", "test.tds", "model.ckpt"})
            fs::copy_file(cfg.path(f), dir / f, fs::copy_options::overwrite_existing);
        const std::string args = "evaluate --out " + dir.string() + " --set eval_episodes=25";
        const int rc1 = run_cli(cli, args + " --workers 1");
        const std::string first = slurp(dir / "evaluate.csv");
        fs::remove(dir / "evaluate.csv");
        const int rc2 = run_cli(cli, args + " --workers 3");
        const std::string second = slurp(dir / "evaluate.csv");
        const bool csv_same = rc1 == 0 && rc2 == 0 && !first.empty() && first == second;

        save_checkpoint(params, (dir / "resaved.ckpt").string());
        const bool bytes_same = slurp(dir / "resaved.ckpt") == slurp(cfg.path("model.ckpt"));
        const bool params_same = load_checkpoint((dir / "resaved.ckpt").string()) == params;
        verdict(10, "reproducibility", csv_same && bytes_same && params_same,
                fmt("evaluate CSV (%zu bytes, 1 vs 3 workers) %s; checkpoint re-save %s, reload %s",
                    first.size(), csv_same ? "byte-identical" : "DIFFERS", bytes_same ? "byte-identical" : "DIFFERS",
                    params_same ? "bit-exact" : "DIFFERS"));
    });

    std::printf("%d criteria failed, %.1f s total\n", failures, seconds_since(started));
    return failures == 0 ? 0 : 1;
}
