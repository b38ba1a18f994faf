#include "slowres/dynsys.hpp"

#include "slowres/error.hpp"
#include "slowres/io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace slowres {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

Vec3 axpy(const Vec3& x, double a, const Vec3& k)
{
    return {x[0] + a * k[0], x[1] + a * k[1], x[2] + a * k[2]};
}

double norm3(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

bool finite_state(const Vec3& x)
{
    constexpr double limit = 1e150;
    return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v) && std::abs(v) < limit; });
}

Vec3 matvec(const std::array<Vec3, 3>& m, const Vec3& v)
{
    Vec3 r{};
    for (int i = 0; i < 3; ++i) r[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
    return r;
}

} // namespace

double eval_schedule(const ParamSchedule& s, double t)
{
    return std::visit(
        overloaded{
            [](const Constant& c) { return c.value; },
            [t](const Triangle& w) {
                double phase = std::fmod(t, w.period);
                if (phase < 0.0) phase += w.period;
                const double frac = phase / w.period;
                return w.lo + (w.hi - w.lo) * (1.0 - std::abs(2.0 * frac - 1.0));
            },
            [t](const LinearRamp& r) {
                if (t <= r.t_start) return r.from;
                if (t >= r.t_end) return r.to;
                const double frac = (t - r.t_start) / (r.t_end - r.t_start);
                return r.from + (r.to - r.from) * frac;
            },
        },
        s);
}

void validate(const ParamSchedule& s)
{
    std::visit(overloaded{
                   [](const Constant& c) {
                       if (!std::isfinite(c.value)) throw Error(ErrorKind::ConfigError, "constant schedule value not finite");
                   },
                   [](const Triangle& w) {
                       if (!(w.lo < w.hi)) throw Error(ErrorKind::ConfigError, "triangle schedule needs lo < hi");
                       if (!(w.period > 0.0)) throw Error(ErrorKind::ConfigError, "triangle schedule needs period > 0");
                   },
                   [](const LinearRamp& r) {
                       if (!(r.t_start < r.t_end)) throw Error(ErrorKind::ConfigError, "ramp schedule needs t_start < t_end");
                       if (!std::isfinite(r.from) || !std::isfinite(r.to))
                           throw Error(ErrorKind::ConfigError, "ramp endpoints not finite");
                   },
               },
               s);
}

Vec3 derivative(const SystemSpec& sys, const Vec3& x, double lambda)
{
    return std::visit(overloaded{
                          [&](const Lorenz& l) {
                              return Vec3{l.a * (x[1] - x[0]), -x[1] + x[0] * (lambda - x[2]), -l.b * x[2] + x[0] * x[1]};
                          },
                          [&](const Rossler& r) {
                              return Vec3{-x[1] - x[2], x[0] + r.a * x[1], lambda + x[2] * (x[0] - r.c)};
                          },
                      },
                      sys);
}

std::array<Vec3, 3> flow_jacobian(const SystemSpec& sys, const Vec3& x, double lambda)
{
    return std::visit(overloaded{
                          [&](const Lorenz& l) {
                              return std::array<Vec3, 3>{Vec3{-l.a, l.a, 0.0}, Vec3{lambda - x[2], -1.0, -x[0]},
                                                         Vec3{x[1], x[0], -l.b}};
                          },
                          [&](const Rossler& r) {
                              return std::array<Vec3, 3>{Vec3{0.0, -1.0, -1.0}, Vec3{1.0, r.a, 0.0},
                                                         Vec3{x[2], 0.0, x[0] - r.c}};
                          },
                      },
                      sys);
}

Vec3 rk4_step(const SystemSpec& sys, const ParamSchedule& s, const Vec3& x, double t, double h)
{
    const double l0 = eval_schedule(s, t);
    const double lh = eval_schedule(s, t + 0.5 * h);
    const double l1 = eval_schedule(s, t + h);
    const Vec3 k1 = derivative(sys, x, l0);
    const Vec3 k2 = derivative(sys, axpy(x, 0.5 * h, k1), lh);
    const Vec3 k3 = derivative(sys, axpy(x, 0.5 * h, k2), lh);
    const Vec3 k4 = derivative(sys, axpy(x, h, k3), l1);
    Vec3 out{};
    for (int i = 0; i < 3; ++i) out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

Trajectory integrate(const SystemSpec& sys, const ParamSchedule& s, const Vec3& x0, double t_end, double dt_obs,
                     int substeps)
{
    if (!(t_end >= 0.0) || !(dt_obs > 0.0) || substeps < 1)
        throw Error(ErrorKind::ConfigError, "integrate needs t_end >= 0, dt_obs > 0, substeps >= 1");

    const auto n_steps = static_cast<std::size_t>(std::floor(t_end / dt_obs + 1e-9));
    const double h = dt_obs / substeps;

    Trajectory tr;
    tr.dt_obs = dt_obs;
    tr.states.reserve(n_steps + 1);
    tr.lambdas.reserve(n_steps + 1);
    tr.y.reserve(n_steps + 1);

    Vec3 x = x0;
    auto record = [&](double t) {
        tr.states.push_back(x);
        tr.lambdas.push_back(eval_schedule(s, t));
        tr.y.push_back(x[0]);
    };
    record(0.0);
    for (std::size_t n = 0; n < n_steps; ++n) {
        const double t0 = static_cast<double>(n) * dt_obs;
        for (int j = 0; j < substeps; ++j) x = rk4_step(sys, s, x, t0 + j * h, h);
        if (!finite_state(x))
            throw Error(ErrorKind::NonFinite, "state diverged at sample " + std::to_string(n + 1) + "; reduce the step");
        record(static_cast<double>(n + 1) * dt_obs);
    }
    return tr;
}

Trajectory generate(const SystemSpec& sys, const ParamSchedule& s, const GenerateOptions& opt)
{
    if (opt.n_samples == 0) throw Error(ErrorKind::ConfigError, "n_samples must be positive");
    validate(s);
    Vec3 x = opt.x0;
    if (opt.spinup > 0.0) {
        const ParamSchedule frozen = Constant{eval_schedule(s, 0.0)};
        const auto warm = integrate(sys, frozen, x, opt.spinup, opt.dt_obs, opt.substeps);
        x = warm.states.back();
    }
    return integrate(sys, s, x, static_cast<double>(opt.n_samples - 1) * opt.dt_obs, opt.dt_obs, opt.substeps);
}

bool FixedPoint::stable() const
{
    return std::all_of(eigenvalues.begin(), eigenvalues.end(), [](const auto& e) { return e.real() < 0.0; });
}

std::array<std::complex<double>, 3> solve_cubic(double c2, double c1, double c0)
{
    // Depressed cubic t^3 + p t + q with s = t - c2/3.
    const double shift = c2 / 3.0;
    const double p = c1 - c2 * c2 / 3.0;
    const double q = 2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0;
    const double disc = q * q / 4.0 + p * p * p / 27.0;

    double real_root = 0.0;
    if (disc < 0.0) {
        const double r = std::sqrt(-p / 3.0);
        const double phi = std::acos(std::clamp(-q / (2.0 * r * r * r), -1.0, 1.0));
        real_root = 2.0 * r * std::cos(phi / 3.0) - shift;
    } else {
        const double sq = std::sqrt(disc);
        real_root = std::cbrt(-q / 2.0 + sq) + std::cbrt(-q / 2.0 - sq) - shift;
    }
    auto poly = [&](double s) { return ((s + c2) * s + c1) * s + c0; };
    auto dpoly = [&](double s) { return (3.0 * s + 2.0 * c2) * s + c1; };
    for (int it = 0; it < 4; ++it) {
        const double d = dpoly(real_root);
        if (d == 0.0) break;
        real_root -= poly(real_root) / d;
    }

    // Deflate: s^3 + c2 s^2 + c1 s + c0 = (s - r)(s^2 + b1 s + b0).
    const double b1 = c2 + real_root;
    const double b0 = c1 + real_root * b1;
    const double qd = b1 * b1 / 4.0 - b0;
    std::complex<double> r2, r3;
    if (qd >= 0.0) {
        const double sq = std::sqrt(qd);
        const double big = (b1 > 0.0) ? -b1 / 2.0 - sq : -b1 / 2.0 + sq;
        r2 = big;
        r3 = (big != 0.0) ? b0 / big : 0.0;
    } else {
        const double im = std::sqrt(-qd);
        r2 = {-b1 / 2.0, im};
        r3 = {-b1 / 2.0, -im};
    }
    return {std::complex<double>(real_root, 0.0), r2, r3};
}

std::vector<FixedPoint> fixed_points_lorenz(double lambda, double a, double b)
{
    const SystemSpec sys = Lorenz{a, b};
    auto make = [&](const Vec3& x) {
        const auto j = flow_jacobian(sys, x, lambda);
        const double tr = j[0][0] + j[1][1] + j[2][2];
        const double minors = (j[0][0] * j[1][1] - j[0][1] * j[1][0]) + (j[0][0] * j[2][2] - j[0][2] * j[2][0]) +
                              (j[1][1] * j[2][2] - j[1][2] * j[2][1]);
        const double det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) -
                           j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0]) +
                           j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
        // det(sI - J) = s^3 - tr s^2 + minors s - det
        return FixedPoint{x, solve_cubic(-tr, minors, -det)};
    };
    std::vector<FixedPoint> out;
    out.push_back(make({0.0, 0.0, 0.0}));
    if (lambda > 1.0) {
        const double r = std::sqrt(b * (lambda - 1.0));
        out.push_back(make({r, r, lambda - 1.0}));
        out.push_back(make({-r, -r, lambda - 1.0}));
    }
    return out;
}

double source_lle(const SystemSpec& sys, double lambda, double t_total, double dt, const SourceLleOptions& opt)
{
    if (!(t_total > 0.0) || !(dt > 0.0) || opt.renorm_every < 1)
        throw Error(ErrorKind::ConfigError, "source_lle needs t_total > 0, dt > 0, renorm_every >= 1");

    const auto steps = static_cast<std::size_t>(std::llround(t_total / dt));
    const auto every = static_cast<std::size_t>(opt.renorm_every);
    // Measurement starts on a renormalization boundary.
    auto skip = static_cast<std::size_t>(std::llround(opt.transient_fraction * static_cast<double>(steps)));
    skip = (skip + every - 1) / every * every;

    Vec3 x = opt.x0;
    Vec3 v{1.0, 0.5, 0.25};
    const double nv = norm3(v);
    for (auto& c : v) c /= nv;

    // Joint RK4 on (x, v) with dv/dt = J(x) v.
    auto rhs = [&](const Vec3& xs, const Vec3& vs, Vec3& dx, Vec3& dv) {
        dx = derivative(sys, xs, lambda);
        dv = matvec(flow_jacobian(sys, xs, lambda), vs);
    };

    double log_sum = 0.0;
    std::size_t measured = 0;
    for (std::size_t k = 0; k < steps; ++k) {
        Vec3 dx1, dv1, dx2, dv2, dx3, dv3, dx4, dv4;
        rhs(x, v, dx1, dv1);
        rhs(axpy(x, 0.5 * dt, dx1), axpy(v, 0.5 * dt, dv1), dx2, dv2);
        rhs(axpy(x, 0.5 * dt, dx2), axpy(v, 0.5 * dt, dv2), dx3, dv3);
        rhs(axpy(x, dt, dx3), axpy(v, dt, dv3), dx4, dv4);
        for (int i = 0; i < 3; ++i) {
            x[i] += dt / 6.0 * (dx1[i] + 2.0 * dx2[i] + 2.0 * dx3[i] + dx4[i]);
            v[i] += dt / 6.0 * (dv1[i] + 2.0 * dv2[i] + 2.0 * dv3[i] + dv4[i]);
        }
        if (!finite_state(x) || !finite_state(v)) throw Error(ErrorKind::NonFinite, "source_lle integration diverged");

        if ((k + 1) % every == 0) {
            const double n = norm3(v);
            if (!(n > 1e-300)) throw Error(ErrorKind::ZeroTangent, "tangent vector collapsed");
            if (k + 1 > skip) {
                log_sum += std::log(n);
                measured += every;
            }
            for (auto& c : v) c /= n;
        }
    }
    if (measured == 0) throw Error(ErrorKind::ConfigError, "source_lle measurement window is empty");
    return log_sum / (static_cast<double>(measured) * dt);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr)
{
    os << "n,t,lambda,x1,x2,x3,y\n";
    for (std::size_t n = 0; n < tr.size(); ++n) {
        const auto& x = tr.states[n];
        os << n << ',' << fmt17(static_cast<double>(n) * tr.dt_obs) << ',' << fmt17(tr.lambdas[n]) << ','
           << fmt17(x[0]) << ',' << fmt17(x[1]) << ',' << fmt17(x[2]) << ',' << fmt17(tr.y[n]) << '\n';
    }
}

} // namespace slowres
