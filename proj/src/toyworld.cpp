#include "actguide/toyworld.hpp"

#include <algorithm>
#include <cmath>

#include "actguide/error.hpp"
#include "actguide/guidance.hpp"
#include "binary_io.hpp"

namespace actguide {

namespace {

constexpr char kDatasetMagic[4] = {'T', 'W', 'D', 'S'};
constexpr std::uint32_t kDatasetVersion = 1;
constexpr std::uint32_t kActionDim = 2;

double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

bool in_world(double v) { return v >= 0.0 && v <= kWorldMax; }

}  // namespace

Frame render_frame(const Position& p) {
    if (!in_world(p.x) || !in_world(p.y)) throw InvalidInput("render position outside [0, 15]^2");
    std::vector<double> px(kFramePixels);
    const double denom = 2.0 * kBlobSigma * kBlobSigma;
    for (int i = 0; i < kFrameSide; ++i) {
        for (int j = 0; j < kFrameSide; ++j) {
            const double dy = i - p.y;
            const double dx = j - p.x;
            px[static_cast<std::size_t>(i * kFrameSide + j)] = std::exp(-(dy * dy + dx * dx) / denom);
        }
    }
    return Frame::from_pixels(std::span<const double>(px));
}

Position step_dynamics(const Position& p, const ActionVector& a) {
    if (a.dim() != kActionDim) throw InvalidInput("toy world actions are 2-dimensional");
    return {std::clamp(p.x + a[0], 0.0, kWorldMax), std::clamp(p.y + a[1], 0.0, kWorldMax)};
}

std::vector<Episode> generate_dataset(std::size_t n_episodes, std::uint64_t seed, int actions_per_episode) {
    if (n_episodes == 0) throw InvalidInput("dataset needs at least one episode");
    if (actions_per_episode < 1) throw InvalidInput("episodes need at least one action");
    std::vector<Episode> out;
    out.reserve(n_episodes);
    for (std::size_t e = 0; e < n_episodes; ++e) {
        Rng rng = make_rng(seed, e);
        std::uniform_real_distribution<double> start(3.0, 12.0);
        std::uniform_real_distribution<double> wide(-kActionLimit, kActionLimit);
        std::normal_distribution<double> small(0.0, 0.1);
        std::bernoulli_distribution pick_small(0.3);

        Episode ep;
        ep.seed = seed;
        ep.index = static_cast<std::uint32_t>(e);
        Position p{to_f32(start(rng)), to_f32(start(rng))};
        ep.positions.push_back(p);
        ep.frames.push_back(render_frame(p));
        for (int k = 0; k < actions_per_episode; ++k) {
            double ax = 0.0;
            double ay = 0.0;
            if (pick_small(rng)) {
                ax = small(rng);
                ay = small(rng);
            } else {
                ax = wide(rng);
                ay = wide(rng);
            }
            ActionVector a{to_f32(std::clamp(ax, -kActionLimit, kActionLimit)),
                           to_f32(std::clamp(ay, -kActionLimit, kActionLimit))};
            const Position next = step_dynamics(p, a);
            p = {to_f32(next.x), to_f32(next.y)};
            ep.actions.push_back(std::move(a));
            ep.positions.push_back(p);
            ep.frames.push_back(render_frame(p));
        }
        out.push_back(std::move(ep));
    }
    return out;
}

void save_dataset(const std::string& path, const std::vector<Episode>& episodes, std::uint64_t seed) {
    if (episodes.empty()) throw InvalidInput("refusing to write an empty dataset");
    const std::size_t n_frames = episodes.front().frames.size();
    detail::ByteWriter w;
    w.raw(kDatasetMagic, 4);
    w.u32(kDatasetVersion);
    w.u32(static_cast<std::uint32_t>(episodes.size()));
    w.u32(static_cast<std::uint32_t>(n_frames));
    w.u32(kFrameSide);
    w.u32(kFrameSide);
    w.u32(kActionDim);
    w.u64(seed);
    for (const auto& ep : episodes) {
        if (ep.frames.size() != n_frames || ep.actions.size() + 1 != n_frames || ep.positions.size() != n_frames)
            throw InvalidInput("all episodes in a dataset file must have the same length");
        w.u32(ep.index);
        for (const auto& f : ep.frames)
            for (float v : f.pixels()) w.f32(v);
        for (const auto& a : ep.actions)
            for (double v : a.values()) w.f32(static_cast<float>(v));
        for (const auto& p : ep.positions) {
            w.f32(static_cast<float>(p.x));
            w.f32(static_cast<float>(p.y));
        }
    }
    detail::write_file(path, w.bytes());
}

std::vector<Episode> load_dataset(const std::string& path) {
    const auto bytes = detail::read_file(path);
    detail::ByteReader r(bytes, path);
    if (r.raw(4) != std::string(kDatasetMagic, 4)) throw IoError(path + ": not a dataset file");
    const auto version = r.u32();
    if (version != kDatasetVersion)
        throw IoError(path + ": unsupported dataset version " + std::to_string(version));
    const auto n_episodes = r.u32();
    const auto n_frames = r.u32();
    const auto height = r.u32();
    const auto width = r.u32();
    const auto action_dim = r.u32();
    const auto seed = r.u64();
    if (height != kFrameSide || width != kFrameSide || action_dim != kActionDim || n_frames < 2)
        throw IoError(path + ": unsupported frame or action dimensions");
    const std::size_t per_episode =
        4 + 4 * (static_cast<std::size_t>(n_frames) * kFramePixels + (n_frames - 1) * kActionDim + n_frames * 2);
    if (r.remaining() != per_episode * n_episodes) throw IoError(path + ": payload length does not match header");

    std::vector<Episode> out(n_episodes);
    std::vector<float> px(kFramePixels);
    for (auto& ep : out) {
        ep.seed = seed;
        ep.index = r.u32();
        for (std::uint32_t k = 0; k < n_frames; ++k) {
            for (auto& v : px) v = r.f32();
            ep.frames.push_back(Frame::from_pixels(std::span<const float>(px)));
        }
        for (std::uint32_t k = 0; k + 1 < n_frames; ++k) {
            const double ax = r.f32();
            const double ay = r.f32();
            ep.actions.push_back(ActionVector{ax, ay});
        }
        for (std::uint32_t k = 0; k < n_frames; ++k) {
            const double x = r.f32();
            const double y = r.f32();
            ep.positions.push_back({x, y});
        }
    }
    return out;
}

std::vector<ActionVector> all_actions(const std::vector<Episode>& episodes) {
    std::vector<ActionVector> out;
    for (const auto& ep : episodes) out.insert(out.end(), ep.actions.begin(), ep.actions.end());
    return out;
}

namespace {

Frame run_pass(const Denoiser& model, const DiffusionSchedule& sched, Frame reference,
               std::span<const ActionVector> actions, const RolloutControls& controls, Rng& rng,
               RolloutStats* stats, std::vector<Frame>& out) {
    const double clip_norm = empirical_mean_action_norm(actions);
    for (const auto& a : actions) {
        const double norm = controls.truncation.norm_source == NormSource::episode_mean ? clip_norm : action_norm(a);
        Latent z0 = init_latent(norm, model.latent_dim(), controls.truncation, rng);
        if (stats) stats->truncation_limits.push_back(truncation_limit(norm, controls.truncation));
        const Condition cond{&reference, a};
        SampleResult res = sample(model, cond, std::move(z0), sched, controls.guidance, rng, controls.sampler);
        if (stats) {
            stats->denoiser_evaluations += res.denoiser_evaluations;
            stats->guided_steps += res.guided_steps;
        }
        reference = Frame::from_latent(res.x0);
        out.push_back(reference);
    }
    return reference;
}

}  // namespace

std::vector<Frame> rollout_short(const Denoiser& model, const DiffusionSchedule& sched, const Episode& episode,
                                 const RolloutControls& controls, Rng& rng, RolloutStats* stats) {
    return rollout_long(model, sched, episode, 1, controls, rng, stats);
}

std::vector<Frame> rollout_long(const Denoiser& model, const DiffusionSchedule& sched, const Episode& episode,
                                int passes, const RolloutControls& controls, Rng& rng, RolloutStats* stats) {
    if (passes < 1) throw InvalidInput("rollout needs at least one pass");
    if (episode.frames.empty()) throw InvalidInput("episode has no reference frame");
    const std::size_t needed = static_cast<std::size_t>(passes) * kActionsPerPass;
    if (episode.actions.size() < needed)
        throw InvalidInput("episode has " + std::to_string(episode.actions.size()) + " actions, rollout needs " +
                           std::to_string(needed));
    controls.truncation.validate();
    std::vector<Frame> out;
    out.reserve(needed);
    Frame reference = episode.frames.front();
    const std::span<const ActionVector> actions(episode.actions);
    for (int pass = 0; pass < passes; ++pass) {
        reference = run_pass(model, sched, reference,
                             actions.subspan(static_cast<std::size_t>(pass) * kActionsPerPass, kActionsPerPass),
                             controls, rng, stats, out);
    }
    return out;
}

}  // namespace actguide
