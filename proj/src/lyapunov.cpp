#include "slowres/lyapunov.hpp"

#include "slowres/error.hpp"
#include "slowres/io.hpp"

#include <cmath>
#include <ostream>

namespace slowres {

namespace {

/// r = W u + W_in (w_out.u) + W_param p + b
Vector preactivation(const FrozenFastMap& map, const Vector& u, double i_fast)
{
    Vector r(u.size());
    map.ws.w.multiply(u, r);
    r.noalias() += map.ws.w_in * map.ws.w_out.dot(u);
    r.noalias() += map.ws.w_param * i_fast;
    r += map.ws.b;
    return r;
}

Vector activation_slope(const FrozenFastMap& map, const Vector& r)
{
    if (map.spec.activation == Activation::Identity) return Vector::Ones(r.size());
    return 1.0 - r.array().tanh().square();
}

void check_map(const FrozenFastMap& map)
{
    if (map.ws.w_out.size() != map.ws.w.size() || map.ws.w_in.size() != map.ws.w.size())
        throw Error(ErrorKind::ConfigError, "frozen map needs a fast reservoir with a fitted readout");
}

} // namespace

Vector frozen_map_step(const FrozenFastMap& map, const Vector& u, double i_fast)
{
    check_map(map);
    const Vector r = preactivation(map, u, i_fast);
    const double a = map.leak();
    if (map.spec.activation == Activation::Identity) return a * u + (1.0 - a) * r;
    return a * u.array() + (1.0 - a) * r.array().tanh();
}

DenseMatrix jacobian(const FrozenFastMap& map, const Vector& u, double i_fast)
{
    check_map(map);
    const Vector slope = activation_slope(map, preactivation(map, u, i_fast));
    DenseMatrix coupled = map.ws.w.to_dense();
    coupled.noalias() += map.ws.w_in * map.ws.w_out.transpose();
    const double a = map.leak();
    DenseMatrix j = (1.0 - a) * (slope.asDiagonal() * coupled);
    j.diagonal().array() += a;
    return j;
}

Vector jacobian_apply(const FrozenFastMap& map, const Vector& u, double i_fast, const Vector& v)
{
    check_map(map);
    const Vector slope = activation_slope(map, preactivation(map, u, i_fast));
    Vector wv(v.size());
    map.ws.w.multiply(v, wv);
    wv.noalias() += map.ws.w_in * map.ws.w_out.dot(v);
    const double a = map.leak();
    return a * v.array() + (1.0 - a) * slope.array() * wv.array();
}

LleEstimate lle(const FrozenFastMap& map, double i_fast, const Vector& u0, std::size_t total_steps,
                std::size_t transient_steps, std::size_t renorm_interval, double dt_obs)
{
    check_map(map);
    if (!(total_steps > transient_steps)) throw Error(ErrorKind::ConfigError, "lle needs total_steps > transient_steps");
    if (renorm_interval == 0) throw Error(ErrorKind::ConfigError, "renorm_interval must be >= 1");
    if (!(dt_obs > 0.0)) throw Error(ErrorKind::ConfigError, "dt_obs must be positive");

    const double a = map.leak();
    const bool tanh_act = map.spec.activation == Activation::Tanh;
    const auto n = u0.size();

    Vector u = u0;
    Vector r(n), wv(n), slope(n);
    auto advance = [&](bool with_tangent, Vector& v) {
        r = preactivation(map, u, i_fast);
        if (with_tangent) {
            slope = tanh_act ? Vector(1.0 - r.array().tanh().square()) : Vector::Ones(n);
            map.ws.w.multiply(v, wv);
            wv.noalias() += map.ws.w_in * map.ws.w_out.dot(v);
            v = a * v.array() + (1.0 - a) * slope.array() * wv.array();
        }
        if (tanh_act)
            u = a * u.array() + (1.0 - a) * r.array().tanh();
        else
            u = a * u + (1.0 - a) * r;
    };

    Vector dummy;
    for (std::size_t k = 0; k < transient_steps; ++k) advance(false, dummy);
    if (!u.allFinite()) throw Error(ErrorKind::NonFinite, "frozen map diverged during the transient");

    Vector v = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
    const std::size_t measure = total_steps - transient_steps;
    double log_sum = 0.0;
    std::size_t since = 0;
    for (std::size_t k = 0; k < measure; ++k) {
        advance(true, v);
        if (++since == renorm_interval || k + 1 == measure) {
            const double norm = v.norm();
            if (!std::isfinite(norm) || !u.allFinite()) throw Error(ErrorKind::NonFinite, "tangent propagation diverged");
            if (norm < 1e-300)
                throw Error(ErrorKind::ZeroTangent, "tangent vector collapsed; shrink renorm_interval");
            log_sum += std::log(norm);
            v /= norm;
            since = 0;
        }
    }

    LleEstimate est;
    est.per_step = log_sum / static_cast<double>(measure);
    est.per_time_unit = est.per_step / dt_obs;
    est.steps_used = measure;
    est.transient_discarded = transient_steps;
    est.renorm_interval = renorm_interval;
    return est;
}

std::vector<double> frozen_orbit(const FrozenFastMap& map, double i_fast, const Vector& u0, std::size_t steps)
{
    std::vector<double> out;
    out.reserve(steps);
    Vector u = u0;
    for (std::size_t k = 0; k < steps; ++k) {
        u = frozen_map_step(map, u, i_fast);
        out.push_back(map.ws.w_out.dot(u));
    }
    return out;
}

void write_lle_csv(std::ostream& os, const std::vector<LleProbe>& probes)
{
    os << "probe_n,i_fast,lle_per_step,lle_per_time_unit,steps_used\n";
    for (const auto& p : probes)
        os << p.probe_n << ',' << fmt17(p.i_fast) << ',' << fmt17(p.estimate.per_step) << ','
           << fmt17(p.estimate.per_time_unit) << ',' << p.estimate.steps_used << '\n';
}

} // namespace slowres
