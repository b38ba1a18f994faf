#pragma once

// Ridge readouts under teacher forcing and the three-reservoir training pipeline.

#include "slowres/reservoir.hpp"
#include "slowres/slowfeat.hpp"

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace slowres {

struct RidgeFit {
    Vector w;
    double condition = 0.0;  ///< 1-norm condition estimate of the regularized Gram matrix
};

/// Condition estimate above which ridge_fit refuses to solve.
inline constexpr double kMaxRidgeCondition = 1e12;

/// argmin_w sum (target - w.u)^2 + beta |w|^2 via (U'U + beta I) w = U' targets
/// and a Cholesky solve. Throws IllConditioned when the Gram matrix is not
/// positive definite or its condition estimate exceeds kMaxRidgeCondition.
RidgeFit ridge_fit(const Eigen::Ref<const History>& states, std::span<const double> targets, double beta);

/// Readout applied to every row.
std::vector<double> apply_readout(const Eigen::Ref<const History>& states, const Vector& w);

/// Mean squared error over target variance. For a constant target the
/// denominator falls back to the squared mean (relative MSE).
double nmse(std::span<const double> targets, std::span<const double> predictions);

struct PipelineConfig {
    ReservoirSpec slow = ReservoirSpec::slow_default();
    ReservoirSpec fast = ReservoirSpec::fast_default();
    ReservoirSpec sdp = ReservoirSpec::sdp_default();
    std::size_t window = 400;
    double fraction = 0.1;
    double saturation_tol = 1e-9;  ///< see select_slow_nodes; negative disables
    double tau_f = 200.0;
    double beta_fast = 1e-4;
    double beta_sdp = 1e-8;
    /// Feed (h - mean)/sd over the training range instead of h itself.
    bool standardize_h = false;
    std::size_t washout_n = 1500;
    std::size_t switchover_n = 5500;
};

/// Throws ConfigError on inconsistent ranges or reservoir roles.
void validate(const PipelineConfig& cfg);

struct TrainedModel {
    ReservoirSpec slow_spec;
    ReservoirSpec fast_spec;
    ReservoirSpec sdp_spec;
    WeightSet slow;
    WeightSet fast;  ///< w_out holds the fitted observation readout
    WeightSet sdp;   ///< w_out holds the fitted slow-feature readout
    SlowNodeSelection selection;
    double tau_f = 200.0;
    /// Affine map applied to h before it reaches the fast reservoir and predictor:
    /// h_in = (h - h_offset) / h_scale.
    double h_offset = 0.0;
    double h_scale = 1.0;
    std::size_t washout_n = 0;
    std::size_t switchover_n = 0;
    std::string config_echo;

    bool operator==(const TrainedModel& other) const;
};

/// Open-loop quantities produced while training, aligned with y:
/// index n of u_tilde / h / y_fit / h_fit refers to observation step n.
struct OpenLoopTrace {
    std::vector<double> u_tilde;
    std::vector<double> h;      ///< smoothed feature, before the affine map
    std::vector<double> h_in;   ///< what the fast reservoir and predictor consume
    std::vector<double> y_fit;  ///< NaN outside the fitted range
    std::vector<double> h_fit;  ///< predictor fit of h_in; NaN outside the fitted range
    Vector fast_state;          ///< u_fast(switchover_n)
    Vector sdp_state;           ///< u_sdp(switchover_n)
};

struct TrainResult {
    TrainedModel model;
    OpenLoopTrace trace;
    double nmse_fast = 0.0;
    double nmse_sdp = 0.0;
    double condition_fast = 0.0;
    double condition_sdp = 0.0;
};

/// Runs slow reservoir -> slow-node selection -> smoothing -> fast and predictor
/// reservoirs, then fits both readouts on targets n in [washout_n, switchover_n).
/// Only y[0, switchover_n) is read.
TrainResult train_pipeline(std::span<const double> y, const PipelineConfig& cfg);

/// Supervised fit of the hidden parameter from reservoir states (diagnostic).
RidgeFit supervised_param_fit(const Eigen::Ref<const History>& history, std::span<const double> lambda_true,
                              double beta);

void write_model(std::ostream& os, const TrainedModel& m);
TrainedModel read_model(std::istream& is);

} // namespace slowres
