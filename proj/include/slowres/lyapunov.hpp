#pragma once

// Largest Lyapunov exponent of the closed-loop fast reservoir at a frozen
// parameter input. The readout is substituted into the input channel, giving
// the autonomous map
//     u' = a u + (1 - a) act((W + W_in w_out') u + W_param p + b).
// With `paper_exact` the leak is dropped (a = 0) in both the map and its Jacobian.

#include "slowres/reservoir.hpp"
#include "slowres/training.hpp"

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace slowres {

/// Fast reservoir with its fitted readout; refers to, does not own, the weights.
struct FrozenFastMap {
    const ReservoirSpec& spec;
    const WeightSet& ws;
    bool paper_exact = false;

    FrozenFastMap(const ReservoirSpec& s, const WeightSet& w, bool exact = false) : spec(s), ws(w), paper_exact(exact) {}
    explicit FrozenFastMap(const TrainedModel& m, bool exact = false) : FrozenFastMap(m.fast_spec, m.fast, exact) {}

    double leak() const { return paper_exact ? 0.0 : spec.leak; }
};

Vector frozen_map_step(const FrozenFastMap& map, const Vector& u, double i_fast);

/// Dense N x N Jacobian: a E + (1 - a) diag(act'(r)) (W + W_in w_out').
DenseMatrix jacobian(const FrozenFastMap& map, const Vector& u, double i_fast);

/// Jacobian-vector product without forming J.
Vector jacobian_apply(const FrozenFastMap& map, const Vector& u, double i_fast, const Vector& v);

struct LleEstimate {
    double per_step = 0.0;
    double per_time_unit = 0.0;
    std::size_t steps_used = 0;
    std::size_t transient_discarded = 0;
    std::size_t renorm_interval = 1;
};

/// Pre-iterates the map `transient_steps` times from u0, then propagates one
/// tangent vector for total_steps - transient_steps steps, renormalizing every
/// `renorm_interval`. Throws NonFinite, or ZeroTangent when the tangent norm
/// drops below 1e-300 between renormalizations.
LleEstimate lle(const FrozenFastMap& map, double i_fast, const Vector& u0, std::size_t total_steps,
                std::size_t transient_steps, std::size_t renorm_interval, double dt_obs);

/// Observation sequence w_out.u of the frozen autonomous map from u0.
std::vector<double> frozen_orbit(const FrozenFastMap& map, double i_fast, const Vector& u0, std::size_t steps);

struct LleProbe {
    std::size_t probe_n = 0;
    double i_fast = 0.0;
    LleEstimate estimate;
};

/// `probe_n,i_fast,lle_per_step,lle_per_time_unit,steps_used`.
void write_lle_csv(std::ostream& os, const std::vector<LleProbe>& probes);

} // namespace slowres
