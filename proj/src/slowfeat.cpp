#include "slowres/slowfeat.hpp"

#include "slowres/error.hpp"
#include "slowres/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace slowres {

std::vector<double> moving_average(std::span<const double> series, std::size_t window)
{
    if (series.empty()) throw Error(ErrorKind::EmptySeries, "moving_average of an empty series");
    if (window == 0) throw Error(ErrorKind::ConfigError, "moving_average window must be >= 1");
    std::vector<double> out(series.size());
    double sum = 0.0;
    for (std::size_t n = 0; n < series.size(); ++n) {
        sum += series[n];
        if (n >= window) sum -= series[n - window];
        const std::size_t count = std::min(n + 1, window);
        out[n] = sum / static_cast<double>(count);
    }
    return out;
}

SlowNodeSelection select_slow_nodes(const History& history, std::size_t window, double fraction, IndexRange range,
                                    double saturation_tol)
{
    const auto rows = static_cast<std::size_t>(history.rows());
    const auto nodes = static_cast<std::size_t>(history.cols());
    if (!(fraction > 0.0 && fraction <= 1.0)) throw Error(ErrorKind::ConfigError, "fraction must lie in (0, 1]");
    if (range.end > rows || range.begin >= range.end)
        throw Error(ErrorKind::ConfigError, "selection range outside the history");
    if (range.size() < window)
        throw Error(ErrorKind::DegenerateRange, "selection range shorter than the moving-average window");

    SlowNodeSelection sel;
    sel.window = window;
    sel.range = range;
    sel.sds.resize(nodes);
    sel.saturated.assign(nodes, false);

    // The moving average runs over the whole prefix so values at range.begin
    // see a full window when one is available.
    std::vector<double> column(range.end);
    for (std::size_t i = 0; i < nodes; ++i) {
        for (std::size_t n = 0; n < range.end; ++n) column[n] = history(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(i));
        const auto avg = moving_average(column, window);
        double mean = 0.0;
        for (std::size_t n = range.begin; n < range.end; ++n) mean += column[n] - avg[n];
        mean /= static_cast<double>(range.size());
        double ss = 0.0;
        for (std::size_t n = range.begin; n < range.end; ++n) {
            const double d = column[n] - avg[n] - mean;
            ss += d * d;
        }
        sel.sds[i] = std::sqrt(ss / static_cast<double>(range.size()));
        if (saturation_tol >= 0.0) {
            const auto first = column.begin() + static_cast<std::ptrdiff_t>(range.begin);
            sel.saturated[i] = std::all_of(first, column.end(), [&](double v) { return std::abs(v) >= 1.0 - saturation_tol; });
        }
    }

    const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(nodes) - 1e-9));
    std::vector<std::size_t> order(nodes);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (sel.saturated[a] != sel.saturated[b]) return !sel.saturated[a];
        return sel.sds[a] < sel.sds[b];
    });
    order.resize(std::max<std::size_t>(keep, 1));
    sel.indices = std::move(order);
    return sel;
}

std::vector<double> extract_feature(const History& history, const SlowNodeSelection& sel)
{
    if (sel.indices.empty()) throw Error(ErrorKind::ConfigError, "slow-node selection is empty");
    std::vector<double> out(static_cast<std::size_t>(history.rows()));
    const double inv = 1.0 / static_cast<double>(sel.indices.size());
    for (Eigen::Index n = 0; n < history.rows(); ++n) {
        double s = 0.0;
        for (auto i : sel.indices) s += std::abs(history(n, static_cast<Eigen::Index>(i)));
        out[static_cast<std::size_t>(n)] = s * inv;
    }
    return out;
}

std::vector<double> smooth(std::span<const double> raw, double tau_f, double h0)
{
    if (!(tau_f >= 1.0)) throw Error(ErrorKind::ConfigError, "tau_f must be >= 1");
    std::vector<double> h(raw.size());
    if (raw.empty()) return h;
    const double keep = 1.0 - 1.0 / tau_f;
    h[0] = h0;
    for (std::size_t n = 0; n + 1 < raw.size(); ++n) h[n + 1] = keep * h[n] + raw[n] / tau_f;
    return h;
}

std::vector<double> smooth(std::span<const double> raw, double tau_f)
{
    if (raw.empty()) throw Error(ErrorKind::EmptySeries, "smooth of an empty series");
    return smooth(raw, tau_f, raw[0]);
}

double pearson(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size() || a.size() < 2) throw Error(ErrorKind::ConfigError, "pearson needs two equal-length series");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) return std::nan("");
    return sab / std::sqrt(saa * sbb);
}

void write_slowfeat_csv(std::ostream& os, const SlowFeatureSeries& s, std::span<const double> lambda_true)
{
    const bool with_lambda = !lambda_true.empty();
    os << (with_lambda ? "n,u_tilde,h,lambda_true\n" : "n,u_tilde,h\n");
    for (std::size_t n = 0; n < s.raw.size(); ++n) {
        os << n << ',' << fmt17(s.raw[n]) << ',' << fmt17(s.smoothed[n]);
        if (with_lambda) os << ',' << fmt17(lambda_true[n]);
        os << '\n';
    }
}

} // namespace slowres
