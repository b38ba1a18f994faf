#pragma once

// Autonomous prediction: both readouts fed back into their reservoirs.

#include "slowres/training.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace slowres {

struct ClosedLoopState {
    Vector u_fast;
    Vector u_sdp;
    double y_hat = 0.0;
    double h_hat = 0.0;
    std::size_t n = 0;  ///< observation step the state refers to
};

/// Continue from open-loop states at step `n`; both outputs come from the readouts.
ClosedLoopState switchover(const TrainedModel& model, const Vector& u_fast, const Vector& u_sdp, std::size_t n);

struct RolloutOptions {
    /// Fast step n consumes h_hat(n+1) from the same step's predictor update;
    /// false gives the one-step-stale h_hat(n), which is what training saw.
    bool fresh_h = true;
    bool record_states = true;
    /// When nonempty, replace the y / h feedback by these teacher signals
    /// (index k drives step k of the rollout).
    std::span<const double> teacher_y;
    std::span<const double> teacher_h;
};

struct RolloutResult {
    std::vector<double> y_hat;  ///< y_hat(n0 + 1 + k)
    std::vector<double> h_hat;  ///< h_hat(n0 + 1 + k)
    History fast_states;        ///< row k = u_fast(n0 + 1 + k); empty unless recorded
    History sdp_states;
    ClosedLoopState final;
};

/// Per step: predictor u_sdp <- act(W u_sdp + W_param h_hat + b), h_hat <- w_out.u_sdp;
/// fast u_f <- a u_f + (1-a) act(W u_f + W_in y_hat + W_param h_hat + b), y_hat <- w_out.u_f.
/// Throws NonFinite when the feedback diverges.
RolloutResult rollout(const ClosedLoopState& start, const TrainedModel& model, std::size_t steps,
                      const RolloutOptions& opt = {});

/// Rows (y(n), y(n-lag), ..., y(n-(dim-1)lag)) for n = (dim-1)lag, ..., len-1.
/// Throws TooShort when no full vector fits.
History delay_embed(std::span<const double> y, std::size_t dim, std::size_t lag);

/// First index i >= start such that the trailing-window variance of `y` stays
/// below `threshold` from i to the end; returns nullopt when it never settles.
/// Index i refers to the window [i - width + 1, i].
std::optional<std::size_t> collapse_index(std::span<const double> y, std::size_t width, double threshold,
                                          std::size_t start = 0);

/// Population variance.
double variance(std::span<const double> v);

/// `n,phase,y_or_yhat,h_or_hhat`: open rows use the teacher signals for
/// n < n_switch, closed rows the rollout outputs.
void write_prediction_csv(std::ostream& os, std::span<const double> y_open, std::span<const double> h_open,
                          const ClosedLoopState& start, const RolloutResult& r);

} // namespace slowres
