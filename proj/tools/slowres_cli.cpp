// slowres: config-driven runner for the slow-feature experiments.
//
//   slowres <generate|exp1|exp2|lle|ablation> [--config PATH] [--seed INT]
//           --out DIR [--paper-exact-jacobian] [--dump-config]
//
// Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical failure.

#include "slowres/config.hpp"
#include "slowres/error.hpp"
#include "slowres/experiments.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool paper_exact = false;
    bool dump = false;
};

slowres::ExperimentConfig resolve(slowres::Command cmd, const Options& o)
{
    using namespace slowres;
    ExperimentConfig cfg;
    if (o.config.empty()) {
        cfg = recipe(default_recipe(cmd));
    } else {
        std::ifstream in(o.config);
        if (!in) throw Error(ErrorKind::Io, "cannot open config " + o.config);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::ConfigError, "cannot parse " + o.config + ": " + e.what());
        }
        if (j.is_object() && j.contains("manifest_version")) {
            const auto c = j.value("command", std::string());
            if (c != to_string(cmd))
                throw Error(ErrorKind::ConfigError, "manifest was written by '" + c + "', not '" +
                                                        std::string(to_string(cmd)) + "'");
        }
        cfg = config_from_json(j, cmd);
    }
    if (o.seed) apply_seed(cfg, *o.seed);
    if (o.paper_exact) cfg.lle.paper_exact = true;
    validate(cfg, cmd);
    return cfg;
}

} // namespace

int main(int argc, char** argv)
{
    using slowres::Command;
    CLI::App app{"slowres experiment runner"};
    app.require_subcommand(1);

    Options opt;
    const std::vector<std::pair<Command, const char*>> commands{
        {Command::Generate, "Integrate the source system and write trajectory.csv"},
        {Command::Exp1, "Slow-feature extraction and its correlation with the hidden parameter"},
        {Command::Exp2, "Train, close the loop, detect collapse and sweep the frozen-map LLE"},
        {Command::Lle, "Frozen-map LLE sweep with source-system reference exponents"},
        {Command::Ablation, "Supervised parameter fit: tanh versus identity slow reservoir"},
    };
    std::vector<std::pair<Command, CLI::App*>> subs;
    for (const auto& [cmd, help] : commands) {
        CLI::App* sub = app.add_subcommand(std::string(slowres::to_string(cmd)), help);
        sub->add_option("--config", opt.config, "JSON config or a run manifest");
        sub->add_option("--seed", opt.seed, "Master seed; overrides the config");
        sub->add_option("--out", opt.out, "Output directory (must not exist or be empty)");
        sub->add_flag("--paper-exact-jacobian", opt.paper_exact, "Drop the leak term in the frozen map and its Jacobian");
        sub->add_flag("--dump-config", opt.dump, "Print the resolved config and exit");
        subs.emplace_back(cmd, sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    Command cmd = Command::Generate;
    for (const auto& [c, sub] : subs)
        if (sub->parsed()) cmd = c;

    try {
        const auto cfg = resolve(cmd, opt);
        if (opt.dump) {
            std::cout << slowres::to_json(cfg).dump(2) << '\n';
            return 0;
        }
        if (opt.out.empty()) throw slowres::Error(slowres::ErrorKind::ConfigError, "--out is required");
        const auto report = slowres::run_command(cmd, cfg, opt.out);
        std::cout << report.dump(2) << '\n';
        return 0;
    } catch (const slowres::Error& e) {
        std::cerr << "slowres: " << e.what() << '\n';
        if (e.kind() == slowres::ErrorKind::Io) return kExitIo;
        return e.numerical() ? kExitNumerical : kExitConfig;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "slowres: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "slowres: " << e.what() << '\n';
        return kExitIo;
    }
}
