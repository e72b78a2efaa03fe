#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <set>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "actguide/error.hpp"
#include "actguide/harness.hpp"
#include "toy_oracle.hpp"

using namespace actguide;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("actguide_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(ACTGUIDE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ExperimentConfig tiny_config(const fs::path& dir) {
    ExperimentConfig cfg;
    cfg.train_episodes = 40;
    cfg.val_episodes = 4;
    cfg.test_episodes = 6;
    cfg.train.steps = 60;
    cfg.train.batch_size = 16;
    cfg.train.layer_dims = {530, 32, 256};
    cfg.diffusion_steps = 20;
    cfg.beta_start = 1e-2;
    cfg.beta_end = 0.5;
    cfg.output_dir = dir.string();
    return cfg;
}

}  // namespace

TEST_CASE("variant grids") {
    ExperimentConfig cfg;
    const auto ev = evaluation_variants(cfg, 1.5);
    REQUIRE(ev.size() == 3);
    CHECK(ev[0].name == "baseline");
    CHECK(ev[0].guidance.mode == GuidanceMode::off);
    CHECK(ev[0].truncation.mode == TruncationMode::off);
    CHECK(ev[1].guidance.mode == GuidanceMode::action_scaled);
    CHECK(ev[1].truncation.mode == TruncationMode::off);
    CHECK(ev[2].truncation.mode == TruncationMode::action_scaled);
    CHECK(ev[2].truncation.mu_act == 1.5);

    const auto ab = ablation_variants(cfg, 1.5);
    CHECK(ab.size() == (cfg.ablation_omegas.size() + 1) * (cfg.ablation_taus.size() + 2));
    std::set<std::string> names;
    for (const auto& v : ab) names.insert(v.name);
    CHECK(names.size() == ab.size());
    CHECK(names.count("omega-fixed-3_tau-fixed-1.5") == 1);
    CHECK(names.count("omega-scaled_tau-scaled") == 1);
    CHECK(names.count("omega-scaled_tau-off") == 1);
}

TEST_CASE("splits are disjoint in seed and sized for long rollouts") {
    ExperimentConfig cfg;
    cfg.train_episodes = 3;
    cfg.val_episodes = 2;
    cfg.test_episodes = 2;
    cfg.long_passes = 3;
    const auto s = make_splits(cfg);
    CHECK(s.train.size() == 3);
    CHECK(s.train[0].actions.size() == 15);
    CHECK(s.test[0].actions.size() == 45);
    CHECK(s.train[0].positions[0] != s.test[0].positions[0]);
    CHECK(s.val[0].positions[0] != s.test[0].positions[0]);
}

TEST_CASE("grid evaluation with the render oracle") {
    const auto sched = make_schedule(30, 1e-2, 0.4);
    const test_support::RenderOracleDenoiser oracle(sched);
    ExperimentConfig cfg;
    auto episodes = generate_dataset(5, 77, 30);
    const auto variants = evaluation_variants(cfg, 1.6);
    EvaluationOptions opts;
    opts.seed = 5;

    const auto one = run_variant_grid(oracle, sched, episodes, variants, opts);
    opts.workers = 3;
    const auto many = run_variant_grid(oracle, sched, episodes, variants, opts);
    CHECK(one.csv() == many.csv());
    REQUIRE(one.rows.size() == 15);

    for (std::size_t v = 0; v < variants.size(); ++v) {
        double p = 0, s = 0, l = 0;
        int n = 0;
        for (const auto& r : one.rows)
            if (r.variant == v) {
                p += r.psnr;
                s += r.ssim;
                l += r.latent_l2;
                ++n;
            }
        const auto& sum = one.summary[v];
        CHECK(sum.episodes == n);
        CHECK(sum.mean_psnr == doctest::Approx(p / n).epsilon(1e-12));
        CHECK(sum.mean_ssim == doctest::Approx(s / n).epsilon(1e-12));
        CHECK(sum.mean_latent_l2 == doctest::Approx(l / n).epsilon(1e-12));
    }
    for (const auto& r : one.rows) {
        CHECK(r.status == "ok");
        CHECK(r.denoiser_evaluations == 15 * 30 + r.guided_steps);
        if (variants[r.variant].guidance.mode == GuidanceMode::off) CHECK(r.guided_steps == 0);
        else CHECK(r.guided_steps > 0);
    }
    const auto json = one.aggregate_json();
    CHECK(json["variants"].size() == 3);
    CHECK(json["variants"][2]["name"] == "cfg_trunc");
    CHECK(json["variants"][0]["mean_psnr"].get<double>() == one.summary[0].mean_psnr);

    // Header and column layout.
    const auto csv = one.csv();
    CHECK(csv.rfind("episode,variant,psnr,ssim,latent_l2,denoiser_evals,guided_steps,status\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 16);

    SUBCASE("long protocol") {
        EvaluationOptions lo = opts;
        lo.rollout = RolloutMode::long_trajectory;
        lo.long_passes = 2;
        lo.keep_frames = true;
        lo.episodes = {1, 3};
        const auto rep = run_variant_grid(oracle, sched, episodes, variants, lo);
        REQUIRE(rep.rows.size() == 6);
        CHECK(rep.rows[0].episode == 1);
        CHECK(rep.rows[0].frames.size() == 30);
        lo.long_passes = 3;
        CHECK_THROWS_AS(run_variant_grid(oracle, sched, episodes, variants, lo), InvalidInput);
    }
}

TEST_CASE("zero actions make guidance a no-op") {
    const auto sched = make_schedule(25, 1e-2, 0.4);
    const test_support::RenderOracleDenoiser oracle(sched);
    Episode ep;
    ep.index = 0;
    ep.positions.assign(16, {6.0, 9.0});
    ep.frames.assign(16, render_frame({6.0, 9.0}));
    ep.actions.assign(15, ActionVector::zero(2));
    ExperimentConfig cfg;
    EvaluationOptions opts;
    opts.keep_frames = true;
    const auto rep = run_variant_grid(oracle, sched, {ep}, evaluation_variants(cfg, 1.6), opts);
    CHECK(rep.rows[1].frames == rep.rows[0].frames);
    CHECK(rep.rows[1].guided_steps == 0);
    CHECK(rep.rows[1].denoiser_evaluations == rep.rows[0].denoiser_evaluations);
}

TEST_CASE("fixed truncation bounds every initial latent") {
    const auto sched = make_schedule(20, 1e-2, 0.4);
    const test_support::RenderOracleDenoiser oracle(sched);
    const test_support::RecordingDenoiser rec(oracle, sched.steps);
    ExperimentConfig cfg;
    cfg.ablation_omegas = {2.0};
    cfg.ablation_taus = {0.75};
    auto variants = ablation_variants(cfg, 1.6);
    variants.resize(1);
    REQUIRE(variants[0].name == "omega-fixed-2_tau-fixed-0.75");
    const auto rep = run_variant_grid(rec, sched, generate_dataset(3, 4), variants, EvaluationOptions{});
    REQUIRE(rec.initial.size() >= 45);
    for (const auto& z : rec.initial)
        for (double v : z) CHECK(std::abs(v) <= 0.75);
    // Fixed guidance is on at every step, and each guided step costs one extra call.
    for (const auto& r : rep.rows) CHECK(r.guided_steps == 15 * 20);
}

TEST_CASE("numerical failures are recorded, not fatal") {
    class Exploding final : public Denoiser {
    public:
        std::size_t latent_dim() const override { return kFramePixels; }
        Latent predict_epsilon(std::span<const double> x, int, const Condition&) const override {
            return Latent(x.size(), std::nan(""));
        }
    };
    const auto sched = make_schedule(10, 1e-2, 0.4);
    ExperimentConfig cfg;
    const auto rep = run_variant_grid(Exploding{}, sched, generate_dataset(2, 1), evaluation_variants(cfg, 1.0), {});
    for (const auto& r : rep.rows) {
        CHECK(r.status == "numerical_failure");
        CHECK(std::isnan(r.psnr));
    }
    CHECK(rep.summary[0].failures == 2);
    CHECK(rep.summary[0].episodes == 0);
}

TEST_CASE("pgm strip") {
    const fs::path d = fresh_dir("pgm");
    const std::vector<Frame> frames{render_frame({3, 3}), render_frame({12, 12})};
    write_pgm_strip((d / "s.pgm").string(), frames, 2);
    const std::string bytes = slurp(d / "s.pgm");
    const std::string header = "P5\n64 32\n255\n";
    REQUIRE(bytes.size() == header.size() + 64 * 32);
    CHECK(bytes.substr(0, header.size()) == header);
    CHECK(static_cast<unsigned char>(bytes[header.size() + 6 * 64 + 6]) == 255);
    CHECK_THROWS_AS(write_pgm_strip((d / "e.pgm").string(), {}, 2), InvalidInput);
    fs::remove_all(d);
}

TEST_CASE("commands end to end") {
    const fs::path d = fresh_dir("commands");
    const auto cfg = tiny_config(d);
    const auto files = cmd_gen_dataset(cfg);
    REQUIRE(files.size() == 3);
    CHECK(load_dataset(files[2]).size() == 6);
    CHECK(load_dataset(files[0]).size() == 40);

    CHECK_THROWS_AS(cmd_evaluate(cfg), IoError);  // no checkpoint yet
    const auto trained = cmd_train(cfg);
    CHECK(trained.loss_curve.size() == 60);
    CHECK(fs::exists(d / "model.ckpt"));
    CHECK(fs::exists(d / "loss_curve.csv"));
    const auto resolved = ExperimentConfig::from_file((d / "resolved_config.txt").string());
    REQUIRE(resolved.mu_act.has_value());
    CHECK(*resolved.mu_act == resolve_mu_act(cfg, load_dataset(files[0])));

    const auto rep = cmd_evaluate(cfg);
    CHECK(slurp(d / "evaluate.csv") == rep.csv());
    const auto first = slurp(d / "evaluate.csv");
    cmd_evaluate(cfg);
    CHECK(slurp(d / "evaluate.csv") == first);
    const auto json = nlohmann::json::parse(slurp(d / "evaluate.json"));
    CHECK(json["command"] == "evaluate");

    ExperimentConfig ab = cfg;
    ab.eval_episodes = 2;
    const auto arep = cmd_ablate(ab);
    CHECK(arep.rows.size() == 2 * ablation_variants(ab, 1.0).size());

    const auto pgms = cmd_dump_frames(cfg, {0, 2}, 1);
    CHECK(pgms.size() == 2 * 4);
    for (const auto& p : pgms) CHECK(fs::file_size(p) > 0);

    ExperimentConfig wrong = cfg;
    wrong.train.layer_dims = {530, 48, 256};
    CHECK_THROWS_AS(cmd_evaluate(wrong), InvalidInput);
    fs::remove_all(d);
}

TEST_CASE("cli") {
    const fs::path d = fresh_dir("cli");
    const std::string common = "--out " + d.string() +
                               " --set train_episodes=30 --set test_episodes=4 --set val_episodes=2"
                               " --set train.steps=40 --set train.batch_size=8 --set train.layers=530,16,256"
                               " --set diffusion_steps=12 --set beta_start=0.01 --set beta_end=0.5";
    CHECK(run_cli("gen-dataset " + common) == 0);
    CHECK(run_cli("train " + common) == 0);
    CHECK(run_cli("evaluate --workers 2 " + common) == 0);
    const auto first = slurp(d / "evaluate.csv");
    CHECK(run_cli("evaluate --workers 1 " + common) == 0);
    CHECK(slurp(d / "evaluate.csv") == first);
    CHECK(run_cli("dump-frames --episodes 1 " + common) == 0);
    CHECK(fs::exists(d / "frames" / "ep0001_ground_truth.pgm"));
    CHECK(run_cli("oracle-check") == 0);

    // Error categories map to exit codes.
    CHECK(run_cli("evaluate --set bogus=1 " + common) == static_cast<int>(ErrorCategory::invalid_input));
    CHECK(run_cli("evaluate --config /nonexistent.cfg") == static_cast<int>(ErrorCategory::io));
    CHECK(run_cli("evaluate --out " + (d / "empty").string()) == static_cast<int>(ErrorCategory::io));
    CHECK(run_cli("train " + common + " --set train.learning_rate=10000 --set train.steps=300") ==
          static_cast<int>(ErrorCategory::training));
    CHECK(run_cli("no-such-command") != 0);
    fs::remove_all(d);
}
