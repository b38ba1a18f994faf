#pragma once

// Experiment configuration: a JSON tree, versioned by `schema_version`.
// A file names a built-in recipe (or inherits the command's default one) and
// overrides any subset of its fields; the fully resolved tree is what the run
// manifests echo back.

#include "slowres/dynsys.hpp"
#include "slowres/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace slowres {

inline constexpr int kSchemaVersion = 1;

enum class Command { Generate, Exp1, Exp2, Lle, Ablation };

std::string_view to_string(Command c);

struct IntegrationConfig {
    double dt_obs = 0.05;
    int substeps = 5;
    double spinup = 50.0;
    Vec3 x0{1.0, 1.0, 1.0};
    std::size_t n_samples = 20000;
};

struct Exp1Config {
    /// First step of the post-transient range used for node selection and the correlation.
    std::size_t transient = 6000;
};

struct RolloutConfig {
    std::size_t end_n = 9000;  ///< last predicted step
    bool fresh_h = true;
    std::size_t collapse_width = 200;
    double collapse_fraction = 0.01;  ///< of the training-range variance of y
};

struct LleConfig {
    std::vector<std::size_t> probes{6000, 7000, 8000};
    std::size_t transient_steps = 2000;
    std::size_t measured_steps = 20000;
    std::size_t renorm_interval = 10;
    bool paper_exact = false;
    /// Source-system reference exponent at lambda(probe); 0 skips it.
    double source_t_total = 500.0;
};

struct EmbedConfig {
    std::size_t dim = 3;
    std::size_t lag = 4;
    std::size_t steps = 3000;  ///< frozen-map orbit length per probe, after the LLE transient
};

/// Readouts are fitted on [exp1.transient, split) and scored on [split, n_samples):
/// in-sample, 500 slowly drifting linear states fit any smooth target.
struct AblationConfig {
    double beta = 0.1;
    std::size_t split = 13000;
};

struct ExperimentConfig {
    int schema_version = kSchemaVersion;
    std::string recipe;
    SystemSpec system = Lorenz{};
    ParamSchedule schedule = Triangle{};
    IntegrationConfig integration;
    PipelineConfig pipeline;
    Exp1Config exp1;
    RolloutConfig rollout;
    LleConfig lle;
    EmbedConfig embed;
    AblationConfig ablation;
    std::uint64_t seed = 1;
};

/// Names accepted by the `recipe` key.
std::vector<std::string> recipe_names();

/// Built-in recipe by name; throws ConfigError for unknown names.
ExperimentConfig recipe(const std::string& name);

/// Recipe a command falls back on when the config does not name one.
std::string default_recipe(Command c);

nlohmann::json to_json(const ExperimentConfig& cfg);

/// Resolves `j` against its recipe (or the command default), rejecting unknown
/// keys and ill-typed values, then validates. A run manifest is accepted as
/// well; its `config` member is used.
ExperimentConfig config_from_json(const nlohmann::json& j, Command c);

ExperimentConfig load_config(const std::filesystem::path& path, Command c);

/// Reservoir seeds follow from the master seed so one integer fixes a run.
void apply_seed(ExperimentConfig& cfg, std::uint64_t seed);

/// Throws ConfigError when ranges are inconsistent for the given command.
void validate(const ExperimentConfig& cfg, Command c);

GenerateOptions generate_options(const ExperimentConfig& cfg);

} // namespace slowres
