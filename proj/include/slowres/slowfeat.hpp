#pragma once

// Slow-node selection on a reservoir history and the smoothed slow feature.

#include "slowres/reservoir.hpp"

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace slowres {

/// Half-open row interval [begin, end).
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end > begin ? end - begin : 0; }
};

struct SlowNodeSelection {
    std::vector<std::size_t> indices;  ///< ascending fluctuation SD; ties by lower index
    std::vector<double> sds;           ///< per-node SD for every node of the history
    std::vector<bool> saturated;       ///< pinned at +-1 over the whole range
    std::size_t window = 0;
    IndexRange range;
};

struct SlowFeatureSeries {
    std::vector<double> raw;
    std::vector<double> smoothed;
    double tau_f = 200.0;
};

/// Causal trailing mean; the first window-1 samples average the available prefix.
/// Throws EmptySeries on empty input.
std::vector<double> moving_average(std::span<const double> series, std::size_t window);

/// Per node, SD of u_i - moving_average(u_i) over `range`; keeps the ceil(fraction*N)
/// smallest. Nodes pinned in tanh saturation (|u| >= 1 - saturation_tol on the
/// whole range) carry no input signal and rank last; a negative tolerance
/// disables that rule. Throws DegenerateRange when the range is shorter than
/// the window.
SlowNodeSelection select_slow_nodes(const History& history, std::size_t window, double fraction, IndexRange range,
                                    double saturation_tol = 1e-9);

/// Mean absolute value of the selected nodes at every row.
std::vector<double> extract_feature(const History& history, const SlowNodeSelection& sel);

/// h(0) = h0, h(n+1) = (1 - 1/tau_f) h(n) + raw(n)/tau_f.
std::vector<double> smooth(std::span<const double> raw, double tau_f, double h0);
/// Same with h0 = raw(0).
std::vector<double> smooth(std::span<const double> raw, double tau_f);

/// Sample Pearson correlation; NaN when either series is constant.
double pearson(std::span<const double> a, std::span<const double> b);

/// CSV `n,u_tilde,h[,lambda_true]`.
void write_slowfeat_csv(std::ostream& os, const SlowFeatureSeries& s, std::span<const double> lambda_true = {});

} // namespace slowres
