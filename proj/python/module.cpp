#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "actguide/error.hpp"
#include "actguide/gaussian_oracle.hpp"
#include "actguide/guidance.hpp"
#include "actguide/harness.hpp"
#include "actguide/metrics.hpp"
#include "actguide/toyworld.hpp"
#include "actguide/truncation.hpp"

namespace py = pybind11;
using namespace actguide;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Frame to_frame(const Array& a) {
    if (a.size() != static_cast<py::ssize_t>(kFramePixels)) throw py::value_error("frame must have 16x16 pixels");
    return Frame::from_pixels(std::span<const double>(a.data(), kFramePixels));
}

Array from_frame(const Frame& f) {
    Array out({kFrameSide, kFrameSide});
    auto* p = out.mutable_data();
    for (std::size_t i = 0; i < kFramePixels; ++i) p[i] = f.pixels()[i];
    return out;
}

Array to_array(const std::vector<double>& v) {
    Array out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Action-scaled classifier-free guidance and noise truncation for action-conditioned diffusion.";

    py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::enum_<GuidanceMode>(m, "GuidanceMode")
        .value("off", GuidanceMode::off)
        .value("action_scaled", GuidanceMode::action_scaled)
        .value("fixed", GuidanceMode::fixed);
    py::enum_<GuidanceParameterization>(m, "GuidanceParameterization")
        .value("conditional_anchor", GuidanceParameterization::conditional_anchor)
        .value("negative_anchor", GuidanceParameterization::negative_anchor);
    py::enum_<TruncationMode>(m, "TruncationMode")
        .value("off", TruncationMode::off)
        .value("action_scaled", TruncationMode::action_scaled)
        .value("fixed", TruncationMode::fixed);

    py::class_<GuidanceConfig>(m, "GuidanceConfig")
        .def(py::init<>())
        .def_readwrite("mode", &GuidanceConfig::mode)
        .def_readwrite("lambda_", &GuidanceConfig::lambda)
        .def_readwrite("fixed_omega", &GuidanceConfig::fixed_omega)
        .def_readwrite("parameterization", &GuidanceConfig::parameterization)
        .def_readwrite("active_fraction", &GuidanceConfig::active_fraction);

    py::class_<TruncationConfig>(m, "TruncationConfig")
        .def(py::init<>())
        .def_readwrite("tau_min", &TruncationConfig::tau_min)
        .def_readwrite("tau_max", &TruncationConfig::tau_max)
        .def_readwrite("mu_act", &TruncationConfig::mu_act)
        .def_readwrite("mode", &TruncationConfig::mode)
        .def_readwrite("fixed_tau", &TruncationConfig::fixed_tau);

    m.def("action_norm", [](std::vector<double> a) { return action_norm(ActionVector(std::move(a))); });
    m.def("negate_action", [](std::vector<double> a) {
        const auto n = negate_action(ActionVector(std::move(a)));
        return std::vector<double>(n.values().begin(), n.values().end());
    });
    m.def("guidance_weight",
          [](std::vector<double> a, int t, int total_steps, const GuidanceConfig& cfg) {
              return guidance_weight(ActionVector(std::move(a)), t, total_steps, cfg);
          },
          py::arg("action"), py::arg("t"), py::arg("total_steps"), py::arg("config"));
    m.def("guided_epsilon",
          [](const Array& pos, const Array& neg, double omega, GuidanceParameterization p) {
              return to_array(guided_epsilon(std::span<const double>(pos.data(), static_cast<std::size_t>(pos.size())),
                                             std::span<const double>(neg.data(), static_cast<std::size_t>(neg.size())),
                                             omega, p));
          },
          py::arg("eps_pos"), py::arg("eps_neg"), py::arg("omega"),
          py::arg("parameterization") = GuidanceParameterization::conditional_anchor);

    m.def("truncation_limit", [](double norm, const TruncationConfig& cfg) { return truncation_limit(norm, cfg); },
          py::arg("norm"), py::arg("config"));
    m.def("sample_truncated_normal",
          [](double tau, std::size_t n, std::uint64_t seed) {
              Rng rng = make_rng(seed);
              return to_array(sample_truncated_normal(tau, n, rng));
          },
          py::arg("tau"), py::arg("n"), py::arg("seed") = 0);

    m.def("make_schedule",
          [](int steps, double beta_start, double beta_end) {
              const auto s = make_schedule(steps, beta_start, beta_end);
              py::dict d;
              d["beta"] = to_array(s.beta);
              d["alpha"] = to_array(s.alpha);
              d["alpha_bar"] = to_array(s.alpha_bar);
              return d;
          },
          py::arg("steps") = 100, py::arg("beta_start") = 1e-3, py::arg("beta_end") = 0.2);

    m.def("exact_epsilon",
          [](const Array& x_t, int t, std::vector<double> a) {
              const auto sched = make_schedule(100, 1e-3, 0.2);
              return to_array(exact_epsilon(std::span<const double>(x_t.data(), static_cast<std::size_t>(x_t.size())),
                                            t, ActionVector(std::move(a)), GaussianWorld::default_world(), sched));
          },
          "Closed-form noise prediction in the default 4x2 Gaussian world (T=100 schedule).");

    m.def("render_frame", [](double x, double y) { return from_frame(render_frame({x, y})); });
    m.def("step_dynamics", [](double x, double y, std::vector<double> a) {
        const auto p = step_dynamics({x, y}, ActionVector(std::move(a)));
        return std::make_pair(p.x, p.y);
    });
    m.def("generate_dataset",
          [](std::size_t n, std::uint64_t seed, int actions) {
              py::list out;
              for (const auto& ep : generate_dataset(n, seed, actions)) {
                  py::list frames;
                  for (const auto& f : ep.frames) frames.append(from_frame(f));
                  std::vector<std::vector<double>> acts;
                  for (const auto& a : ep.actions) acts.emplace_back(a.values().begin(), a.values().end());
                  std::vector<std::pair<double, double>> pos;
                  for (const auto& p : ep.positions) pos.emplace_back(p.x, p.y);
                  py::dict d;
                  d["frames"] = frames;
                  d["actions"] = acts;
                  d["positions"] = pos;
                  out.append(d);
              }
              return out;
          },
          py::arg("n_episodes"), py::arg("seed"), py::arg("actions_per_episode") = kActionsPerPass);

    m.def("psnr", [](const Array& pred, const Array& gt) { return psnr(to_frame(pred), to_frame(gt)); });
    m.def("ssim", [](const Array& pred, const Array& gt) { return ssim(to_frame(pred), to_frame(gt)); });
    m.def("latent_l2", [](const std::vector<Array>& pred, const std::vector<Array>& gt) {
        std::vector<Frame> p, g;
        for (const auto& a : pred) p.push_back(to_frame(a));
        for (const auto& a : gt) g.push_back(to_frame(a));
        return latent_l2(p, g);
    });

    m.def("oracle_check", [](std::uint64_t seed) {
        py::list out;
        for (const auto& c : cmd_oracle_check(seed)) out.append(py::make_tuple(c.name, c.passed, c.measured, c.threshold));
        return out;
    }, py::arg("seed") = 42);
}
