#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "actguide/action.hpp"
#include "actguide/diffusion.hpp"
#include "actguide/frame.hpp"
#include "actguide/toyworld.hpp"

namespace actguide {

inline constexpr int kTimeFeatures = 16;
inline constexpr int kMlpInputDim = static_cast<int>(kFramePixels) * 2 + 2 + kTimeFeatures;  // 530
inline constexpr int kMlpHiddenDim = 256;

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;
};

/// Fully connected network with SiLU on hidden layers and a linear output.
struct MlpParams {
    std::vector<DenseLayer> layers;

    /// {input, hidden..., output}
    std::vector<int> dims() const;
    std::size_t parameter_count() const;
    bool all_finite() const;

    friend bool operator==(const MlpParams& a, const MlpParams& b);
};

std::vector<int> default_layer_dims();

/// Weights uniform in +-1/sqrt(fan_in), biases zero.
MlpParams init_params(std::span<const int> dims, std::uint64_t seed);

/// Same-shaped zero parameters, used as a gradient accumulator.
MlpParams zeros_like(const MlpParams& p);

/// sin/cos of pi 2^k (t / T) for k = 0..7.
std::vector<double> timestep_features(int t, int total_steps);

/// Packs (x_t, prev frame, action, timestep) into one network input column.
Eigen::VectorXd encode_input(std::span<const double> x_t, int t, int total_steps, const Frame& prev_frame,
                             const ActionVector& a);

Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs);

/// Raw network output for a single noisy latent: an estimate of the clean
/// next-frame latent. MlpDenoiser turns it into a noise prediction.
Latent forward(const MlpParams& params, std::span<const double> x_t, int t, int total_steps,
               const Frame& prev_frame, const ActionVector& a);
/// eps = (x_t - sqrt(ab) clean) / sqrt(1 - ab), the noise implied by a clean-latent estimate.
Latent epsilon_from_clean(std::span<const double> x_t, std::span<const double> clean, double alpha_bar);
/// Directional derivative of the network output at `input` along `tangent`.
Eigen::VectorXd forward_jvp(const MlpParams& params, const Eigen::VectorXd& input, const Eigen::VectorXd& tangent);

/// Mean over the batch of weights[j] * |out_j - targets_j|^2 / out_dim, where
/// an empty `weights` means all ones. Fills `grad` (same shape as params) when
/// non-null.
double loss_and_gradient(const MlpParams& params, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                         const Eigen::VectorXd& weights, MlpParams* grad);
double loss_and_gradient(const MlpParams& params, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                         MlpParams* grad);

class AdamOptimizer {
public:
    AdamOptimizer(const MlpParams& shape, double learning_rate, double beta1, double beta2, double epsilon);
    void step(MlpParams& params, const MlpParams& grad);

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    MlpParams m_, v_;
};

struct TrainConfig {
    int steps = 20000;
    int batch_size = 64;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 7;
    /// Per-sample loss weight is min(1, snr_cap / SNR_t) on the noise error.
    double snr_cap = 5.0;
    std::vector<int> layer_dims = default_layer_dims();

    void validate() const;
};

struct TrainResult {
    MlpParams params;
    std::vector<double> loss_curve;  // one entry per optimizer step
};

/// One random training batch; columns are samples. Targets are clean
/// next-frame latents and `weights` turns the clean-latent error into the
/// SNR-capped noise error: |eps - eps_hat|^2 = SNR_t |clean - out|^2.
struct TrainingBatch {
    Eigen::MatrixXd inputs;
    Eigen::MatrixXd targets;
    Eigen::VectorXd weights;
};
TrainingBatch draw_batch(const std::vector<Episode>& episodes, const DiffusionSchedule& sched, int batch_size,
                         double snr_cap, Rng& rng);
using TrainProgress = std::function<void(int step, double loss)>;

/// Noise-prediction training with the SNR-capped weighting. Throws TrainingError if the loss stays above
/// 10x its initial value for 100 consecutive steps.
TrainResult train(const std::vector<Episode>& episodes, const DiffusionSchedule& sched, const TrainConfig& cfg,
                  const TrainProgress& progress = {});

/// Checkpoint layout is documented in docs/file-formats.md.
void save_checkpoint(const MlpParams& params, const std::string& path);
MlpParams load_checkpoint(const std::string& path);
/// Also rejects a checkpoint whose layer dimensions differ from `expected_dims`.
MlpParams load_checkpoint(const std::string& path, std::span<const int> expected_dims);

class MlpDenoiser final : public Denoiser {
public:
    MlpDenoiser(MlpParams params, DiffusionSchedule sched);

    std::size_t latent_dim() const override { return kFramePixels; }
    Latent predict_epsilon(std::span<const double> x_t, int t, const Condition& cond) const override;

    const MlpParams& params() const noexcept { return params_; }

private:
    MlpParams params_;
    DiffusionSchedule sched_;
};

}  // namespace actguide
