#include "actguide/mlp.hpp"

#include <cmath>
#include <numbers>

#include "actguide/error.hpp"
#include "binary_io.hpp"

namespace actguide {

namespace {

constexpr char kCheckpointMagic[4] = {'A', 'G', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

Eigen::MatrixXd silu(const Eigen::MatrixXd& z) {
    return z.unaryExpr([](double v) { return v * sigmoid(v); });
}

Eigen::MatrixXd silu_grad(const Eigen::MatrixXd& z) {
    return z.unaryExpr([](double v) {
        const double s = sigmoid(v);
        return s * (1.0 + v * (1.0 - s));
    });
}

void check_input_rows(const MlpParams& p, Eigen::Index rows) {
    if (p.layers.empty()) throw InvalidInput("network has no layers");
    if (p.layers.front().weight.cols() != rows) throw InvalidInput("network input has the wrong length");
}

}  // namespace

std::vector<int> MlpParams::dims() const {
    std::vector<int> d;
    if (layers.empty()) return d;
    d.push_back(static_cast<int>(layers.front().weight.cols()));
    for (const auto& l : layers) d.push_back(static_cast<int>(l.weight.rows()));
    return d;
}

std::size_t MlpParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

bool MlpParams::all_finite() const {
    for (const auto& l : layers)
        if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
}

bool operator==(const MlpParams& a, const MlpParams& b) {
    if (a.dims() != b.dims()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        if (a.layers[i].weight != b.layers[i].weight || a.layers[i].bias != b.layers[i].bias) return false;
    }
    return true;
}

std::vector<int> default_layer_dims() { return {kMlpInputDim, kMlpHiddenDim, kMlpHiddenDim, static_cast<int>(kFramePixels)}; }

MlpParams init_params(std::span<const int> dims, std::uint64_t seed) {
    if (dims.size() < 2) throw InvalidInput("network needs at least an input and an output dimension");
    for (int d : dims)
        if (d < 1) throw InvalidInput("layer dimensions must be positive");
    Rng rng = make_rng(seed, 0x1a17);
    MlpParams p;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(dims[i]));
        std::uniform_real_distribution<double> u(-bound, bound);
        DenseLayer l;
        l.weight.resize(dims[i + 1], dims[i]);
        // Fill row-major so the draw order matches the checkpoint layout.
        for (int r = 0; r < dims[i + 1]; ++r)
            for (int c = 0; c < dims[i]; ++c) l.weight(r, c) = u(rng);
        l.bias = Eigen::VectorXd::Zero(dims[i + 1]);
        p.layers.push_back(std::move(l));
    }
    return p;
}

MlpParams zeros_like(const MlpParams& p) {
    MlpParams z;
    for (const auto& l : p.layers)
        z.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
    return z;
}

std::vector<double> timestep_features(int t, int total_steps) {
    if (total_steps < 1 || t < 1 || t > total_steps) throw InvalidInput("timestep out of range");
    const double s = static_cast<double>(t) / static_cast<double>(total_steps);
    std::vector<double> f(kTimeFeatures);
    for (int k = 0; k < kTimeFeatures / 2; ++k) {
        const double angle = std::numbers::pi * std::ldexp(1.0, k) * s;
        f[static_cast<std::size_t>(2 * k)] = std::sin(angle);
        f[static_cast<std::size_t>(2 * k + 1)] = std::cos(angle);
    }
    return f;
}

Eigen::VectorXd encode_input(std::span<const double> x_t, int t, int total_steps, const Frame& prev_frame,
                             const ActionVector& a) {
    if (x_t.size() != kFramePixels) throw InvalidInput("noisy latent must have 256 entries");
    if (a.dim() != 2) throw InvalidInput("network expects a 2-dimensional action");
    Eigen::VectorXd in(kMlpInputDim);
    Eigen::Index k = 0;
    for (double v : x_t) in[k++] = v;
    for (float v : prev_frame.pixels()) in[k++] = 2.0 * static_cast<double>(v) - 1.0;
    for (double v : a.values()) in[k++] = v / kActionLimit;
    for (double v : timestep_features(t, total_steps)) in[k++] = v;
    return in;
}

Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs) {
    check_input_rows(params, inputs.rows());
    Eigen::MatrixXd h = inputs;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        const auto& l = params.layers[i];
        Eigen::MatrixXd z = l.weight * h;
        z.colwise() += l.bias;
        h = (i + 1 < params.layers.size()) ? silu(z) : std::move(z);
    }
    return h;
}

Latent forward(const MlpParams& params, std::span<const double> x_t, int t, int total_steps,
               const Frame& prev_frame, const ActionVector& a) {
    const Eigen::VectorXd out = forward_batch(params, encode_input(x_t, t, total_steps, prev_frame, a));
    return Latent(out.data(), out.data() + out.size());
}

Eigen::VectorXd forward_jvp(const MlpParams& params, const Eigen::VectorXd& input, const Eigen::VectorXd& tangent) {
    check_input_rows(params, input.size());
    if (tangent.size() != input.size()) throw InvalidInput("tangent and input lengths differ");
    Eigen::VectorXd h = input;
    Eigen::VectorXd dh = tangent;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        const auto& l = params.layers[i];
        Eigen::VectorXd z = l.weight * h + l.bias;
        Eigen::VectorXd dz = l.weight * dh;
        if (i + 1 < params.layers.size()) {
            dh = silu_grad(z).cwiseProduct(dz);
            h = silu(z);
        } else {
            dh = std::move(dz);
        }
    }
    return dh;
}

Latent epsilon_from_clean(std::span<const double> x_t, std::span<const double> clean, double alpha_bar) {
    if (x_t.size() != clean.size()) throw InvalidInput("latent and clean estimate lengths differ");
    if (!(alpha_bar > 0.0 && alpha_bar < 1.0)) throw InvalidInput("alpha_bar must lie in (0, 1)");
    const double a = std::sqrt(alpha_bar);
    const double b = std::sqrt(1.0 - alpha_bar);
    Latent eps(x_t.size());
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = (x_t[i] - a * clean[i]) / b;
    return eps;
}

double loss_and_gradient(const MlpParams& params, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                         MlpParams* grad) {
    return loss_and_gradient(params, inputs, targets, Eigen::VectorXd(), grad);
}

double loss_and_gradient(const MlpParams& params, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                         const Eigen::VectorXd& weights, MlpParams* grad) {
    check_input_rows(params, inputs.rows());
    const std::size_t n_layers = params.layers.size();
    // Pre-activations z_i and layer inputs a_i.
    std::vector<Eigen::MatrixXd> acts{inputs};
    std::vector<Eigen::MatrixXd> pre;
    for (std::size_t i = 0; i < n_layers; ++i) {
        const auto& l = params.layers[i];
        Eigen::MatrixXd z = l.weight * acts.back();
        z.colwise() += l.bias;
        pre.push_back(z);
        if (i + 1 < n_layers) acts.push_back(silu(z));
    }
    const Eigen::MatrixXd& out = pre.back();
    if (out.rows() != targets.rows() || out.cols() != targets.cols())
        throw InvalidInput("targets do not match network output shape");
    if (weights.size() != 0 && weights.size() != targets.cols())
        throw InvalidInput("one loss weight per batch column is required");
    Eigen::MatrixXd diff = out - targets;
    const double count = static_cast<double>(diff.size());
    Eigen::MatrixXd weighted = weights.size() == 0 ? diff : Eigen::MatrixXd(diff * weights.asDiagonal());
    const double loss = diff.cwiseProduct(weighted).sum() / count;
    if (!grad) return loss;

    if (grad->dims() != params.dims()) *grad = zeros_like(params);
    Eigen::MatrixXd delta = (2.0 / count) * weighted;
    for (std::size_t i = n_layers; i-- > 0;) {
        auto& g = grad->layers[i];
        g.weight.noalias() = delta * acts[i].transpose();
        g.bias = delta.rowwise().sum();
        if (i == 0) break;
        Eigen::MatrixXd back = params.layers[i].weight.transpose() * delta;
        delta = back.cwiseProduct(silu_grad(pre[i - 1]));
    }
    return loss;
}

AdamOptimizer::AdamOptimizer(const MlpParams& shape, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(zeros_like(shape)), v_(zeros_like(shape)) {}

void AdamOptimizer::step(MlpParams& params, const MlpParams& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
        m = beta1_ * m + (1.0 - beta1_) * g;
        v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
        param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
    };
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        update(params.layers[i].weight, grad.layers[i].weight, m_.layers[i].weight, v_.layers[i].weight);
        update(params.layers[i].bias, grad.layers[i].bias, m_.layers[i].bias, v_.layers[i].bias);
    }
}

void TrainConfig::validate() const {
    if (steps < 1 || batch_size < 1) throw InvalidInput("training steps and batch size must be positive");
    if (!(learning_rate >= 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) ||
        !(epsilon > 0.0))
        throw InvalidInput("invalid optimizer hyperparameters");
    if (layer_dims.size() < 2 || layer_dims.front() != kMlpInputDim ||
        layer_dims.back() != static_cast<int>(kFramePixels))
        throw InvalidInput("layer dimensions must start at 530 and end at 256");
    if (!(snr_cap > 0.0)) throw InvalidInput("train.snr_cap must be > 0");
}

TrainingBatch draw_batch(const std::vector<Episode>& episodes, const DiffusionSchedule& sched, int batch_size,
                         double snr_cap, Rng& rng) {
    if (episodes.empty()) throw InvalidInput("training needs a nonempty dataset");
    std::uniform_int_distribution<std::size_t> pick_episode(0, episodes.size() - 1);
    std::uniform_int_distribution<int> pick_t(1, sched.steps);
    std::normal_distribution<double> normal(0.0, 1.0);
    TrainingBatch batch{Eigen::MatrixXd(kMlpInputDim, batch_size), Eigen::MatrixXd(kFramePixels, batch_size),
                        Eigen::VectorXd(batch_size)};
    std::vector<double> eps(kFramePixels);
    for (int b = 0; b < batch_size; ++b) {
        const Episode& ep = episodes[pick_episode(rng)];
        if (ep.actions.empty()) throw InvalidInput("training episode has no transitions");
        std::uniform_int_distribution<std::size_t> pick_step(0, ep.actions.size() - 1);
        const std::size_t k = pick_step(rng);
        const int t = pick_t(rng);
        for (double& e : eps) e = normal(rng);
        const Latent clean = ep.frames[k + 1].to_latent();
        const Latent x_t = forward_noise(clean, t, eps, sched);
        batch.inputs.col(b) = encode_input(x_t, t, sched.steps, ep.frames[k], ep.actions[k]);
        batch.targets.col(b) = Eigen::Map<const Eigen::VectorXd>(clean.data(), static_cast<Eigen::Index>(clean.size()));
        const double ab = sched.alpha_bar_at(t);
        batch.weights[b] = std::min(ab / (1.0 - ab), snr_cap);
    }
    return batch;
}

TrainResult train(const std::vector<Episode>& episodes, const DiffusionSchedule& sched, const TrainConfig& cfg,
                  const TrainProgress& progress) {
    cfg.validate();
    if (episodes.empty()) throw InvalidInput("training needs a nonempty dataset");
    TrainResult result;
    result.params = init_params(cfg.layer_dims, cfg.seed);
    result.loss_curve.reserve(static_cast<std::size_t>(cfg.steps));
    AdamOptimizer adam(result.params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    MlpParams grad = zeros_like(result.params);
    Rng rng = make_rng(cfg.seed, 0xda7a);

    double initial_loss = 0.0;
    int diverged_for = 0;
    for (int step = 0; step < cfg.steps; ++step) {
        const TrainingBatch batch = draw_batch(episodes, sched, cfg.batch_size, cfg.snr_cap, rng);
        const double loss = loss_and_gradient(result.params, batch.inputs, batch.targets, batch.weights, &grad);
        if (!std::isfinite(loss)) throw TrainingError("training loss became non-finite at step " + std::to_string(step));
        if (step == 0) initial_loss = loss;
        diverged_for = loss > 10.0 * initial_loss ? diverged_for + 1 : 0;
        if (diverged_for >= 100)
            throw TrainingError("training diverged: loss above 10x initial for 100 steps (step " +
                                std::to_string(step) + ")");
        result.loss_curve.push_back(loss);
        adam.step(result.params, grad);
        if (progress) progress(step, loss);
    }
    return result;
}

void save_checkpoint(const MlpParams& params, const std::string& path) {
    if (params.layers.empty()) throw InvalidInput("cannot save an empty network");
    detail::ByteWriter w;
    w.raw(kCheckpointMagic, 4);
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(params.layers.size()));
    for (int d : params.dims()) w.u32(static_cast<std::uint32_t>(d));
    for (const auto& l : params.layers) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.f64(l.weight(r, c));
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) w.f64(l.bias[r]);
    }
    const auto& body = w.bytes();
    w.u64(detail::fnv1a(body.data(), body.size()));
    detail::write_file(path, w.bytes());
}

MlpParams load_checkpoint(const std::string& path) {
    const auto bytes = detail::read_file(path);
    detail::ByteReader r(bytes, path);
    if (r.raw(4) != std::string(kCheckpointMagic, 4)) throw IoError(path + ": not a checkpoint file");
    const auto version = r.u32();
    if (version != kCheckpointVersion)
        throw IoError(path + ": checkpoint version " + std::to_string(version) + " is not supported");
    const auto n_layers = r.u32();
    if (n_layers == 0 || n_layers > 64) throw IoError(path + ": implausible layer count");
    std::vector<int> dims;
    std::size_t n_params = 0;
    for (std::uint32_t i = 0; i <= n_layers; ++i) {
        const auto d = r.u32();
        if (d == 0 || d > (1u << 20)) throw IoError(path + ": implausible layer dimension");
        if (i > 0) n_params += static_cast<std::size_t>(d) * (static_cast<std::size_t>(dims.back()) + 1);
        dims.push_back(static_cast<int>(d));
    }
    if (r.remaining() != n_params * 8 + 8) throw IoError(path + ": payload length does not match layer table");

    MlpParams p;
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        DenseLayer l;
        l.weight.resize(dims[i + 1], dims[i]);
        l.bias.resize(dims[i + 1]);
        for (Eigen::Index row = 0; row < l.weight.rows(); ++row)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(row, c) = r.f64();
        for (Eigen::Index row = 0; row < l.bias.size(); ++row) l.bias[row] = r.f64();
        p.layers.push_back(std::move(l));
    }
    const std::size_t body = r.position();
    if (r.u64() != detail::fnv1a(bytes.data(), body)) throw IoError(path + ": checksum mismatch");
    if (!p.all_finite()) throw IoError(path + ": checkpoint holds non-finite parameters");
    return p;
}

MlpParams load_checkpoint(const std::string& path, std::span<const int> expected_dims) {
    MlpParams p = load_checkpoint(path);
    const auto dims = p.dims();
    if (!std::equal(dims.begin(), dims.end(), expected_dims.begin(), expected_dims.end())) {
        std::string got;
        for (int d : dims) got += (got.empty() ? "" : "x") + std::to_string(d);
        throw InvalidInput(path + ": checkpoint layer shape " + got + " does not match the configured network");
    }
    return p;
}

MlpDenoiser::MlpDenoiser(MlpParams params, DiffusionSchedule sched) : params_(std::move(params)), sched_(std::move(sched)) {
    const auto dims = params_.dims();
    if (dims.size() < 2 || dims.front() != kMlpInputDim || dims.back() != static_cast<int>(kFramePixels))
        throw InvalidInput("network shape is not a toy-world denoiser");
}

Latent MlpDenoiser::predict_epsilon(std::span<const double> x_t, int t, const Condition& cond) const {
    if (!cond.prev_frame) throw InvalidInput("network denoiser needs a previous frame");
    const Latent clean = forward(params_, x_t, t, sched_.steps, *cond.prev_frame, cond.action);
    return epsilon_from_clean(x_t, clean, sched_.alpha_bar_at(t));
}

}  // namespace actguide
