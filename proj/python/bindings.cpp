#include "slowres/config.hpp"
#include "slowres/dynsys.hpp"
#include "slowres/error.hpp"
#include "slowres/experiments.hpp"
#include "slowres/training.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace py::literals;
using namespace slowres;

namespace {

// Configs cross the boundary as JSON text; the Python side wraps them in dicts.
Command command_named(const std::string& name)
{
    for (Command c : {Command::Generate, Command::Exp1, Command::Exp2, Command::Lle, Command::Ablation})
        if (to_string(c) == name) return c;
    throw Error(ErrorKind::ConfigError, "unknown command \"" + name + "\"");
}

ExperimentConfig parse(const std::string& config_json, const std::string& command)
{
    return config_from_json(nlohmann::json::parse(config_json), command_named(command));
}

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

} // namespace

PYBIND11_MODULE(_slowres, m)
{
    static py::exception<Error> error(m, "SlowresError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error, e.what());
        } catch (const nlohmann::json::exception& e) {
            py::set_error(error, (std::string("ConfigError: ") + e.what()).c_str());
        }
    });

    m.def("recipe_names", &recipe_names);
    m.def("recipe_json", [](const std::string& name) { return to_json(recipe(name)).dump(); });
    m.def(
        "resolve_config",
        [](const std::string& config_json, const std::string& command) { return to_json(parse(config_json, command)).dump(); },
        py::arg("config_json"), py::arg("command"));

    m.def(
        "generate",
        [](const std::string& config_json) {
            const auto c = parse(config_json, "generate");
            const Trajectory tr = generate(c.system, c.schedule, generate_options(c));
            py::array_t<double> states({tr.states.size(), std::size_t{3}});
            auto s = states.mutable_unchecked<2>();
            for (std::size_t i = 0; i < tr.states.size(); ++i)
                for (std::size_t k = 0; k < 3; ++k) s(i, k) = tr.states[i][k];
            return py::dict("dt_obs"_a = tr.dt_obs, "y"_a = to_array(tr.y), "lambdas"_a = to_array(tr.lambdas),
                            "states"_a = states);
        },
        py::arg("config_json"));

    m.def(
        "source_lle",
        [](const std::string& system, double lambda, double t_total, double dt) {
            SystemSpec s = Lorenz{};
            if (system == "rossler")
                s = Rossler{};
            else if (system != "lorenz")
                throw Error(ErrorKind::ConfigError, "system must be \"lorenz\" or \"rossler\"");
            return source_lle(s, lambda, t_total, dt);
        },
        py::arg("system"), py::arg("lam"), py::arg("t_total"), py::arg("dt"));

    m.def(
        "ridge_fit",
        [](const History& states, const std::vector<double>& targets, double beta) {
            const RidgeFit f = ridge_fit(states, targets, beta);
            return py::make_tuple(f.w, f.condition);
        },
        py::arg("states"), py::arg("targets"), py::arg("beta"));

    m.def(
        "exp1",
        [](const std::string& config_json) {
            const auto cfg = parse(config_json, "exp1");
            Exp1Result r;
            {
                py::gil_scoped_release release;
                r = run_exp1(cfg);
            }
            return py::dict("r"_a = r.r, "r_smoothed"_a = r.r_smoothed, "degenerate"_a = r.degenerate,
                            "selected"_a = r.selection.indices, "u_tilde"_a = to_array(r.feature.raw),
                            "h"_a = to_array(r.feature.smoothed), "lambdas"_a = to_array(r.trajectory.lambdas));
        },
        py::arg("config_json"));

    m.def(
        "ablation",
        [](const std::string& config_json) {
            const auto r = run_ablation(parse(config_json, "ablation"));
            return py::dict("nmse_tanh"_a = r.nmse_tanh, "nmse_identity"_a = r.nmse_identity, "ratio"_a = r.ratio,
                            "nmse_tanh_in_sample"_a = r.nmse_tanh_in_sample,
                            "nmse_identity_in_sample"_a = r.nmse_identity_in_sample);
        },
        py::arg("config_json"));

    m.def(
        "run_command",
        [](const std::string& command, const std::string& config_json, const std::string& out) {
            const auto c = command_named(command);
            const auto cfg = parse(config_json, command);
            nlohmann::json report;
            {
                py::gil_scoped_release release;
                report = run_command(c, cfg, out);
            }
            return report.dump();
        },
        py::arg("command"), py::arg("config_json"), py::arg("out"));
}
