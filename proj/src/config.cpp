#include "actguide/config.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "actguide/error.hpp"

namespace actguide {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw InvalidInput("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
    Int out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw InvalidInput("config key '" + key + "': expected an integer, got '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw InvalidInput("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
    if (out.empty()) throw InvalidInput("config key '" + key + "': empty list");
    return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_int<int>(key, trim(item)));
    return out;
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T>
std::string join(const std::vector<T>& v) {
    std::string out;
    for (const auto& x : v) {
        if (!out.empty()) out += ",";
        if constexpr (std::is_floating_point_v<T>) out += num(x);
        else out += std::to_string(x);
    }
    return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

ExperimentConfig ExperimentConfig::parse(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidInput(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

void ExperimentConfig::set(const std::string& key, const std::string& v) {
    if (key == "seed") seed = parse_int<std::uint64_t>(key, v);
    else if (key == "train_episodes") train_episodes = parse_int<int>(key, v);
    else if (key == "val_episodes") val_episodes = parse_int<int>(key, v);
    else if (key == "test_episodes") test_episodes = parse_int<int>(key, v);
    else if (key == "eval_episodes") eval_episodes = parse_int<int>(key, v);
    else if (key == "rollout") {
        if (v == "short") rollout = RolloutMode::short_trajectory;
        else if (v == "long") rollout = RolloutMode::long_trajectory;
        else throw InvalidInput("rollout must be 'short' or 'long'");
    } else if (key == "long_passes") long_passes = parse_int<int>(key, v);
    else if (key == "diffusion_steps") diffusion_steps = parse_int<int>(key, v);
    else if (key == "beta_start") beta_start = parse_double(key, v);
    else if (key == "beta_end") beta_end = parse_double(key, v);
    else if (key == "sampler") {
        if (v == "deterministic") sampler.kind = SamplerKind::deterministic;
        else if (v == "ancestral") sampler.kind = SamplerKind::ancestral;
        else throw InvalidInput("sampler must be 'deterministic' or 'ancestral'");
    } else if (key == "clamp_x0") sampler.clamp_x0 = parse_bool(key, v);
    else if (key == "clamp_limit") sampler.clamp_limit = parse_double(key, v);
    else if (key == "guidance.lambda") guidance.lambda = parse_double(key, v);
    else if (key == "guidance.active_fraction") guidance.active_fraction = parse_double(key, v);
    else if (key == "guidance.parameterization") {
        if (v == "conditional_anchor") guidance.parameterization = GuidanceParameterization::conditional_anchor;
        else if (v == "negative_anchor") guidance.parameterization = GuidanceParameterization::negative_anchor;
        else throw InvalidInput("guidance.parameterization must be conditional_anchor or negative_anchor");
    } else if (key == "truncation.tau_min") truncation.tau_min = parse_double(key, v);
    else if (key == "truncation.tau_max") truncation.tau_max = parse_double(key, v);
    else if (key == "truncation.mu_act") {
        if (v == "auto") mu_act.reset();
        else mu_act = parse_double(key, v);
    } else if (key == "truncation.norm_source") {
        if (v == "episode_mean") truncation.norm_source = NormSource::episode_mean;
        else if (v == "per_step") truncation.norm_source = NormSource::per_step;
        else throw InvalidInput("truncation.norm_source must be episode_mean or per_step");
    } else if (key == "ablation.omegas") ablation_omegas = parse_list(key, v);
    else if (key == "ablation.taus") ablation_taus = parse_list(key, v);
    else if (key == "train.steps") train.steps = parse_int<int>(key, v);
    else if (key == "train.batch_size") train.batch_size = parse_int<int>(key, v);
    else if (key == "train.learning_rate") train.learning_rate = parse_double(key, v);
    else if (key == "train.beta1") train.beta1 = parse_double(key, v);
    else if (key == "train.beta2") train.beta2 = parse_double(key, v);
    else if (key == "train.epsilon") train.epsilon = parse_double(key, v);
    else if (key == "train.snr_cap") train.snr_cap = parse_double(key, v);
    else if (key == "train.seed") train.seed = parse_int<std::uint64_t>(key, v);
    else if (key == "train.layers") train.layer_dims = parse_int_list(key, v);
    else if (key == "output_dir") output_dir = v;
    else if (key == "workers") workers = parse_int<int>(key, v);
    else throw InvalidInput("unknown config key '" + key + "'");
}

std::string ExperimentConfig::to_text() const {
    std::ostringstream o;
    o << "seed = " << seed << "\n"
      << "train_episodes = " << train_episodes << "\n"
      << "val_episodes = " << val_episodes << "\n"
      << "test_episodes = " << test_episodes << "\n"
      << "eval_episodes = " << eval_episodes << "\n"
      << "rollout = " << (rollout == RolloutMode::short_trajectory ? "short" : "long") << "\n"
      << "long_passes = " << long_passes << "\n"
      << "diffusion_steps = " << diffusion_steps << "\n"
      << "beta_start = " << num(beta_start) << "\n"
      << "beta_end = " << num(beta_end) << "\n"
      << "sampler = " << (sampler.kind == SamplerKind::deterministic ? "deterministic" : "ancestral") << "\n"
      << "clamp_x0 = " << (sampler.clamp_x0 ? "true" : "false") << "\n"
      << "clamp_limit = " << num(sampler.clamp_limit) << "\n"
      << "guidance.lambda = " << num(guidance.lambda) << "\n"
      << "guidance.active_fraction = " << num(guidance.active_fraction) << "\n"
      << "guidance.parameterization = "
      << (guidance.parameterization == GuidanceParameterization::conditional_anchor ? "conditional_anchor"
                                                                                     : "negative_anchor")
      << "\n"
      << "truncation.tau_min = " << num(truncation.tau_min) << "\n"
      << "truncation.tau_max = " << num(truncation.tau_max) << "\n"
      << "truncation.mu_act = " << (mu_act ? num(*mu_act) : std::string("auto")) << "\n"
      << "truncation.norm_source = "
      << (truncation.norm_source == NormSource::episode_mean ? "episode_mean" : "per_step") << "\n"
      << "ablation.omegas = " << join(ablation_omegas) << "\n"
      << "ablation.taus = " << join(ablation_taus) << "\n"
      << "train.steps = " << train.steps << "\n"
      << "train.batch_size = " << train.batch_size << "\n"
      << "train.learning_rate = " << num(train.learning_rate) << "\n"
      << "train.beta1 = " << num(train.beta1) << "\n"
      << "train.beta2 = " << num(train.beta2) << "\n"
      << "train.epsilon = " << num(train.epsilon) << "\n"
      << "train.snr_cap = " << num(train.snr_cap) << "\n"
      << "train.seed = " << train.seed << "\n"
      << "train.layers = " << join(train.layer_dims) << "\n"
      << "output_dir = " << output_dir << "\n"
      << "workers = " << workers << "\n";
    return o.str();
}

void ExperimentConfig::validate() const {
    if (train_episodes < 1 || val_episodes < 1 || test_episodes < 1)
        throw InvalidInput("every split needs at least one episode");
    if (eval_episodes < 0) throw InvalidInput("eval_episodes must be >= 0");
    if (long_passes < 1) throw InvalidInput("long_passes must be >= 1");
    if (workers < 1) throw InvalidInput("workers must be >= 1");
    if (!(sampler.clamp_limit > 0.0)) throw InvalidInput("clamp_limit must be > 0");
    for (double w : ablation_omegas)
        if (!(w >= 0.0)) throw InvalidInput("ablation omegas must be >= 0");
    for (double t : ablation_taus)
        if (!(t > 0.0)) throw InvalidInput("ablation taus must be > 0");
    make_schedule(diffusion_steps, beta_start, beta_end);
    guidance.validate();
    TruncationConfig t = truncation;
    if (mu_act) t.mu_act = *mu_act;
    t.validate();
    train.validate();
}

std::string ExperimentConfig::path(const std::string& file) const {
    return (std::filesystem::path(output_dir) / file).string();
}

std::uint64_t ExperimentConfig::split_seed(int split) const {
    return seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(split + 1));
}

}  // namespace actguide
