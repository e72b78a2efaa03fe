#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "actguide/action.hpp"
#include "actguide/diffusion.hpp"
#include "actguide/frame.hpp"
#include "actguide/rng.hpp"
#include "actguide/truncation.hpp"

namespace actguide {

/// Blob centre in pixel coordinates; x is the column, y the row.
struct Position {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Position&, const Position&) = default;
};

inline constexpr double kWorldMax = 15.0;
inline constexpr double kBlobSigma = 1.5;
inline constexpr double kActionLimit = 3.0;
inline constexpr int kActionsPerPass = 15;

/// Gaussian blob of width kBlobSigma with peak 1 at `p`. `p` must lie in [0, 15]^2.
Frame render_frame(const Position& p);

/// p + a, clamped componentwise to [0, 15].
Position step_dynamics(const Position& p, const ActionVector& a);

/// frames.size() == positions.size() == actions.size() + 1, and
/// frames[k] == render_frame(positions[k]).
struct Episode {
    std::vector<Frame> frames;
    std::vector<ActionVector> actions;
    std::vector<Position> positions;
    std::uint64_t seed = 0;
    std::uint32_t index = 0;
};

/// Episodes are a pure function of (seed, episode index). Start positions are
/// uniform on [3, 12]^2; each action comes from 0.3 N(0, 0.1^2 I) + 0.7 U([-3, 3]^2),
/// clamped to [-3, 3]^2. Positions and actions are rounded to single precision.
std::vector<Episode> generate_dataset(std::size_t n_episodes, std::uint64_t seed,
                                      int actions_per_episode = kActionsPerPass);

/// Dataset file layout is documented in docs/file-formats.md.
void save_dataset(const std::string& path, const std::vector<Episode>& episodes, std::uint64_t seed);
std::vector<Episode> load_dataset(const std::string& path);

std::vector<ActionVector> all_actions(const std::vector<Episode>& episodes);

struct RolloutControls {
    GuidanceConfig guidance;
    TruncationConfig truncation;
    SamplerOptions sampler;
};

struct RolloutStats {
    std::int64_t denoiser_evaluations = 0;
    int guided_steps = 0;
    /// Every truncation bound used, one per generated frame.
    std::vector<double> truncation_limits;
};

/// Generates frames 2..16 from the reference frame and the first 15 actions,
/// each frame conditioned on the previously generated one.
std::vector<Frame> rollout_short(const Denoiser& model, const DiffusionSchedule& sched, const Episode& episode,
                                 const RolloutControls& controls, Rng& rng, RolloutStats* stats = nullptr);

/// `passes` chained 15-action passes; pass k starts from the last frame
/// generated by pass k - 1. Only episode.frames[0] is ever read.
std::vector<Frame> rollout_long(const Denoiser& model, const DiffusionSchedule& sched, const Episode& episode,
                                int passes, const RolloutControls& controls, Rng& rng,
                                RolloutStats* stats = nullptr);

}  // namespace actguide
