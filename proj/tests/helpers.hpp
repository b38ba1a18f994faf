#pragma once

#include "slowres/dynsys.hpp"
#include "slowres/training.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <random>

namespace testutil {

/// Reduced pipeline that trains in well under a second.
inline slowres::PipelineConfig small_pipeline(std::uint64_t seed = 7)
{
    slowres::PipelineConfig c;
    c.slow.n_units = 80;
    c.fast.n_units = 150;
    c.fast.recurrent_init = slowres::SparseUniform{0.1};
    c.sdp.n_units = 40;
    c.sdp.recurrent_init = slowres::SparseUniform{0.2};
    c.slow.seed = seed;
    c.fast.seed = seed + 1;
    c.sdp.seed = seed + 2;
    c.window = 50;
    c.tau_f = 20.0;
    c.beta_fast = 1e-3;
    c.beta_sdp = 1e-6;
    c.washout_n = 200;
    c.switchover_n = 1000;
    return c;
}

inline std::vector<double> lorenz_y(std::size_t n, const slowres::ParamSchedule& s = slowres::Constant{28.0})
{
    slowres::GenerateOptions g;
    g.n_samples = n;
    return slowres::generate(slowres::Lorenz{}, s, g).y;
}

inline slowres::DenseMatrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols)
{
    std::normal_distribution<double> nd;
    slowres::DenseMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = nd(rng);
    return m;
}

/// Ridge solution through the SVD: w = V diag(s / (s^2 + beta)) U' y.
inline slowres::Vector svd_ridge(const slowres::DenseMatrix& a, const slowres::Vector& y, double beta)
{
    Eigen::JacobiSVD<slowres::DenseMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const slowres::Vector s = svd.singularValues();
    slowres::Vector f(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) f[i] = s[i] / (s[i] * s[i] + beta);
    return svd.matrixV() * f.asDiagonal() * (svd.matrixU().transpose() * y);
}

inline double dist(const slowres::Vec3& a, const slowres::Vec3& b)
{
    return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

/// Benettin two-trajectory estimate: a companion trajectory at distance d0 is
/// pulled back to d0 along the separation after every interval.
inline double two_trajectory_lle(double lambda, double t_total, double dt)
{
    const slowres::Constant s{lambda};
    slowres::Vec3 x{1.0, 1.0, 1.0};
    for (int k = 0; k < 2000; ++k) x = slowres::rk4_step(slowres::Lorenz{}, s, x, 0.0, dt);
    const double d0 = 1e-8;
    slowres::Vec3 z{x[0] + d0, x[1], x[2]};
    const int every = 10;
    const auto steps = static_cast<long>(t_total / dt);
    double sum = 0.0;
    for (long k = 1; k <= steps; ++k) {
        x = slowres::rk4_step(slowres::Lorenz{}, s, x, 0.0, dt);
        z = slowres::rk4_step(slowres::Lorenz{}, s, z, 0.0, dt);
        if (k % every == 0) {
            const double d = dist(x, z);
            sum += std::log(d / d0);
            for (int i = 0; i < 3; ++i) z[i] = x[i] + (z[i] - x[i]) * d0 / d;
        }
    }
    return sum / (static_cast<double>(steps / every * every) * dt);
}

} // namespace testutil
