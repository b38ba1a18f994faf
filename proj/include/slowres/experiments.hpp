#pragma once

// End-to-end experiment runners. The run_* functions compute and return
// results; the cmd_* functions wrap them, write the CSV artifacts plus
// report.json and manifest.json into a fresh output directory, and return the
// report.

#include "slowres/closedloop.hpp"
#include "slowres/config.hpp"
#include "slowres/dynsys.hpp"
#include "slowres/lyapunov.hpp"
#include "slowres/slowfeat.hpp"
#include "slowres/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <vector>

namespace slowres {

inline constexpr int kManifestVersion = 1;

struct Exp1Result {
    Trajectory trajectory;
    SlowNodeSelection selection;
    SlowFeatureSeries feature;
    double r = 0.0;           ///< Pearson(-u_tilde, lambda) over [transient, n)
    double r_smoothed = 0.0;  ///< same for the smoothed feature
    bool degenerate = false;  ///< fraction selects every node
};

Exp1Result run_exp1(const ExperimentConfig& cfg);

struct FixedPointCheck {
    double lambda_terminal = 0.0;
    double expected_abs = 0.0;  ///< sqrt(b (lambda - 1))
    double observed = 0.0;      ///< last y_hat
    double rel_error = 0.0;
};

struct SourceReference {
    double lambda = 0.0;
    double lle = 0.0;  ///< per time unit
};

struct Exp2Result {
    Trajectory trajectory;
    TrainResult train;
    ClosedLoopState start;
    RolloutResult rollout;
    double train_variance = 0.0;           ///< variance of y over [washout_n, switchover_n)
    std::optional<std::size_t> collapse_n;  ///< observation step of the first settled window end
    double nmse_closed = 0.0;               ///< closed loop vs truth over (switchover_n, end_n]
    std::optional<FixedPointCheck> fixed_point;
    std::vector<LleProbe> probes;
    std::vector<SourceReference> source;  ///< empty unless requested
};

/// Observation step of rollout row k.
inline std::size_t rollout_step(const Exp2Result& r, std::size_t k) { return r.start.n + 1 + k; }

/// Frozen-map LLE at each probe, run concurrently; probe n uses u_fast(n) and
/// h_hat(n) from the rollout.
std::vector<LleProbe> lle_sweep(const Exp2Result& r, const LleConfig& lc, double dt_obs);

Exp2Result run_exp2(const ExperimentConfig& cfg, bool with_lle = true, bool with_source_reference = false);

struct AblationResult {
    double nmse_tanh = 0.0;  ///< held out, [split, n)
    double nmse_identity = 0.0;
    double nmse_tanh_in_sample = 0.0;
    double nmse_identity_in_sample = 0.0;
    double ratio = 0.0;  ///< held-out identity / tanh
};

/// Supervised lambda fits from the tanh and identity slow reservoirs (same
/// seed), fitted on [exp1.transient, ablation.split) and scored on the rest.
/// Throws ConfigError when the trajectory carries no lambda ground truth.
AblationResult run_ablation(const ExperimentConfig& cfg, const Trajectory& tr);
AblationResult run_ablation(const ExperimentConfig& cfg);

/// Each writes into `out`, which must not exist or be empty, and returns report.json's content.
nlohmann::json cmd_generate(const ExperimentConfig& cfg, const std::filesystem::path& out);
nlohmann::json cmd_exp1(const ExperimentConfig& cfg, const std::filesystem::path& out);
nlohmann::json cmd_exp2(const ExperimentConfig& cfg, const std::filesystem::path& out);
nlohmann::json cmd_lle(const ExperimentConfig& cfg, const std::filesystem::path& out);
nlohmann::json cmd_ablation(const ExperimentConfig& cfg, const std::filesystem::path& out);

nlohmann::json run_command(Command c, const ExperimentConfig& cfg, const std::filesystem::path& out);

} // namespace slowres
