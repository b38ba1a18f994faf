#pragma once

// Source systems: Lorenz / Roessler flows with a slowly drifting parameter,
// fixed-step RK4 integration and reference Lyapunov exponents.

#include <array>
#include <complex>
#include <cstddef>
#include <iosfwd>
#include <variant>
#include <vector>

namespace slowres {

using Vec3 = std::array<double, 3>;

struct Constant {
    double value = 28.0;
};

/// Piecewise-linear, `period`-periodic wave starting at `lo` for t = 0 and
/// peaking at `hi` for t = period / 2.
struct Triangle {
    double lo = 64.0;
    double hi = 100.0;
    double period = 500.0;
};

/// Constant `from` before `t_start`, constant `to` after `t_end`, affine in between.
struct LinearRamp {
    double from = 28.0;
    double to = 18.0;
    double t_start = 0.0;
    double t_end = 450.0;
};

using ParamSchedule = std::variant<Constant, Triangle, LinearRamp>;

double eval_schedule(const ParamSchedule& s, double t);

/// Throws ConfigError when the schedule violates its invariants.
void validate(const ParamSchedule& s);

struct Lorenz {
    double a = 10.0;
    double b = 8.0 / 3.0;
};

struct Rossler {
    double a = 0.2;
    double c = 5.7;
};

using SystemSpec = std::variant<Lorenz, Rossler>;

Vec3 derivative(const SystemSpec& sys, const Vec3& x, double lambda);

/// Jacobian of the flow with respect to the state at fixed lambda.
std::array<Vec3, 3> flow_jacobian(const SystemSpec& sys, const Vec3& x, double lambda);

struct Trajectory {
    double dt_obs = 0.0;
    std::vector<Vec3> states;
    std::vector<double> lambdas;
    std::vector<double> y;

    std::size_t size() const { return y.size(); }
};

/// Classic RK4 with internal step dt_obs / substeps. The schedule is sampled at
/// every stage time; samples are taken every dt_obs starting at t = 0 with x0.
/// Throws NonFinite when the state overflows.
Trajectory integrate(const SystemSpec& sys, const ParamSchedule& s, const Vec3& x0,
                     double t_end, double dt_obs, int substeps);

/// Advance one RK4 step of size h from time t.
Vec3 rk4_step(const SystemSpec& sys, const ParamSchedule& s, const Vec3& x, double t, double h);

struct GenerateOptions {
    Vec3 x0{1.0, 1.0, 1.0};
    double spinup = 50.0;       ///< time units integrated at lambda(0) and discarded
    double dt_obs = 0.05;
    int substeps = 5;
    std::size_t n_samples = 20000;
};

/// Spin up at the schedule's initial value, then integrate and record
/// `n_samples` observations.
Trajectory generate(const SystemSpec& sys, const ParamSchedule& s, const GenerateOptions& opt);

struct FixedPoint {
    Vec3 x;
    std::array<std::complex<double>, 3> eigenvalues;

    bool stable() const;
};

/// Origin, plus C+ and C- when lambda > 1. Eigenvalues come from the
/// characteristic cubic of the Lorenz Jacobian at each point.
std::vector<FixedPoint> fixed_points_lorenz(double lambda, double a, double b);

/// Roots of s^3 + c2 s^2 + c1 s + c0.
std::array<std::complex<double>, 3> solve_cubic(double c2, double c1, double c0);

struct SourceLleOptions {
    int renorm_every = 10;            ///< internal steps between renormalizations
    double transient_fraction = 0.2;  ///< share of the run excluded from the average
    Vec3 x0{1.0, 1.0, 1.0};
};

/// Largest Lyapunov exponent (per time unit) of the source flow at fixed lambda,
/// from joint RK4 integration of the state and one tangent vector.
double source_lle(const SystemSpec& sys, double lambda, double t_total, double dt,
                  const SourceLleOptions& opt = {});

/// CSV with header `n,t,lambda,x1,x2,x3,y`, 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& tr);

} // namespace slowres
