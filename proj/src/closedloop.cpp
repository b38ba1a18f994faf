#include "slowres/closedloop.hpp"

#include "slowres/error.hpp"
#include "slowres/io.hpp"

#include <cmath>
#include <numeric>
#include <ostream>

namespace slowres {

ClosedLoopState switchover(const TrainedModel& model, const Vector& u_fast, const Vector& u_sdp, std::size_t n)
{
    if (model.fast.w_out.size() != u_fast.size() || model.sdp.w_out.size() != u_sdp.size())
        throw Error(ErrorKind::ConfigError, "switchover states do not match the trained readouts");
    ClosedLoopState s;
    s.u_fast = u_fast;
    s.u_sdp = u_sdp;
    s.y_hat = model.fast.w_out.dot(u_fast);
    s.h_hat = model.sdp.w_out.dot(u_sdp);
    s.n = n;
    return s;
}

RolloutResult rollout(const ClosedLoopState& start, const TrainedModel& model, std::size_t steps,
                      const RolloutOptions& opt)
{
    if (steps == 0) throw Error(ErrorKind::ConfigError, "rollout needs at least one step");
    const bool teacher = !opt.teacher_y.empty() || !opt.teacher_h.empty();
    if (teacher && (opt.teacher_y.size() < steps || opt.teacher_h.size() < steps))
        throw Error(ErrorKind::ConfigError, "teacher signals shorter than the rollout");

    RolloutResult r;
    r.y_hat.reserve(steps);
    r.h_hat.reserve(steps);
    if (opt.record_states) {
        r.fast_states.resize(static_cast<Eigen::Index>(steps), start.u_fast.size());
        r.sdp_states.resize(static_cast<Eigen::Index>(steps), start.u_sdp.size());
    }

    Vector u_f = start.u_fast;
    Vector u_s = start.u_sdp;
    Vector next_f(u_f.size());
    Vector next_s(u_s.size());
    double y_hat = start.y_hat;
    double h_hat = start.h_hat;

    for (std::size_t k = 0; k < steps; ++k) {
        const double y_in = teacher ? opt.teacher_y[k] : y_hat;
        const double h_in = teacher ? opt.teacher_h[k] : h_hat;

        step_into(u_s, 0.0, h_in, model.sdp, model.sdp_spec, next_s);
        u_s.swap(next_s);
        const double h_next = model.sdp.w_out.dot(u_s);

        const double p = (opt.fresh_h && !teacher) ? h_next : h_in;
        step_into(u_f, y_in, p, model.fast, model.fast_spec, next_f);
        u_f.swap(next_f);
        const double y_next = model.fast.w_out.dot(u_f);

        if (!std::isfinite(y_next) || !std::isfinite(h_next))
            throw Error(ErrorKind::NonFinite, "closed-loop feedback diverged at rollout step " + std::to_string(k));
        y_hat = y_next;
        h_hat = h_next;
        r.y_hat.push_back(y_hat);
        r.h_hat.push_back(h_hat);
        if (opt.record_states) {
            r.fast_states.row(static_cast<Eigen::Index>(k)) = u_f.transpose();
            r.sdp_states.row(static_cast<Eigen::Index>(k)) = u_s.transpose();
        }
    }
    r.final = {u_f, u_s, y_hat, h_hat, start.n + steps};
    return r;
}

History delay_embed(std::span<const double> y, std::size_t dim, std::size_t lag)
{
    if (dim == 0) throw Error(ErrorKind::ConfigError, "embedding dimension must be >= 1");
    const std::size_t span = (dim - 1) * lag;
    if (y.size() <= span) throw Error(ErrorKind::TooShort, "series too short for the requested embedding");
    const std::size_t count = y.size() - span;
    History out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t d = 0; d < dim; ++d)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = y[i + span - d * lag];
    return out;
}

double variance(std::span<const double> v)
{
    if (v.empty()) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / static_cast<double>(v.size());
}

std::optional<std::size_t> collapse_index(std::span<const double> y, std::size_t width, double threshold,
                                          std::size_t start)
{
    if (width == 0 || y.size() < width) return std::nullopt;
    std::optional<std::size_t> found;
    const std::size_t first = std::max(start, width - 1);
    for (std::size_t i = y.size(); i-- > first;) {
        if (variance(y.subspan(i + 1 - width, width)) < threshold)
            found = i;
        else
            break;
    }
    return found;
}

void write_prediction_csv(std::ostream& os, std::span<const double> y_open, std::span<const double> h_open,
                          const ClosedLoopState& start, const RolloutResult& r)
{
    os << "n,phase,y_or_yhat,h_or_hhat\n";
    const std::size_t n0 = start.n;
    for (std::size_t n = 0; n < n0 && n < y_open.size(); ++n)
        os << n << ",open," << fmt17(y_open[n]) << ',' << fmt17(h_open[n]) << '\n';
    os << n0 << ",closed," << fmt17(start.y_hat) << ',' << fmt17(start.h_hat) << '\n';
    for (std::size_t k = 0; k < r.y_hat.size(); ++k)
        os << n0 + 1 + k << ",closed," << fmt17(r.y_hat[k]) << ',' << fmt17(r.h_hat[k]) << '\n';
}

} // namespace slowres
