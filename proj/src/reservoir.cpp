#include "slowres/reservoir.hpp"

#include "slowres/binary.hpp"
#include "slowres/error.hpp"
#include "slowres/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <vector>

namespace slowres {

ReservoirSpec ReservoirSpec::slow_default()
{
    ReservoirSpec s;
    s.role = ReservoirRole::Slow;
    s.n_units = 500;
    s.leak = 0.995;
    s.rho_target = 1.0;
    s.recurrent_init = DenseGaussian{};
    s.chi_in = 0.5;
    s.chi_param = 0.0;
    s.chi_b = 5.0;
    s.seed = 1;
    return s;
}

ReservoirSpec ReservoirSpec::fast_default()
{
    ReservoirSpec s;
    s.role = ReservoirRole::Fast;
    s.n_units = 2000;
    s.leak = 0.95;
    s.rho_target = 0.95;
    s.recurrent_init = SparseUniform{0.02};
    s.chi_in = 0.75;
    s.chi_param = 0.15;
    s.chi_b = 15.0;
    s.seed = 2;
    return s;
}

ReservoirSpec ReservoirSpec::sdp_default()
{
    ReservoirSpec s;
    s.role = ReservoirRole::Sdp;
    s.n_units = 500;
    s.leak = 0.0;
    s.rho_target = 0.95;
    s.recurrent_init = SparseUniform{0.02};
    s.chi_in = 0.0;
    s.chi_param = 5e-3;
    s.chi_b = 5e-3;
    s.seed = 3;
    return s;
}

void validate(const ReservoirSpec& spec)
{
    auto fail = [](const std::string& what) { throw Error(ErrorKind::ConfigError, what); };
    if (spec.n_units == 0) fail("reservoir needs at least one unit");
    if (!(spec.leak >= 0.0 && spec.leak <= 1.0)) fail("leak must lie in [0, 1]");
    if (!(spec.rho_target > 0.0) || !std::isfinite(spec.rho_target)) fail("rho_target must be positive");
    if (const auto* s = std::get_if<SparseUniform>(&spec.recurrent_init)) {
        if (!(s->density > 0.0 && s->density <= 1.0)) fail("density must lie in (0, 1]");
    }
    for (double chi : {spec.chi_in, spec.chi_param, spec.chi_b})
        if (!(chi >= 0.0) || !std::isfinite(chi)) fail("input scalings must be finite and nonnegative");
}

// --- RecurrentMatrix ---------------------------------------------------------

Eigen::Index RecurrentMatrix::size() const
{
    return std::visit([](const auto& m) { return m.rows(); }, m_);
}

Eigen::Index RecurrentMatrix::nonzeros() const
{
    if (is_sparse()) return sparse().nonZeros();
    return (dense().array() != 0.0).count();
}

void RecurrentMatrix::multiply(const Vector& x, Vector& out) const
{
    if (is_sparse())
        out.noalias() = sparse() * x;
    else
        out.noalias() = dense() * x;
}

Vector RecurrentMatrix::operator*(const Vector& x) const
{
    Vector out(size());
    multiply(x, out);
    return out;
}

void RecurrentMatrix::scale(double factor)
{
    std::visit([factor](auto& m) { m *= factor; }, m_);
}

DenseMatrix RecurrentMatrix::to_dense() const
{
    if (is_sparse()) return DenseMatrix(sparse());
    return dense();
}

bool RecurrentMatrix::operator==(const RecurrentMatrix& other) const
{
    if (is_sparse() != other.is_sparse() || size() != other.size()) return false;
    if (!is_sparse()) return dense() == other.dense();
    const auto& a = sparse();
    const auto& b = other.sparse();
    if (a.nonZeros() != b.nonZeros()) return false;
    return std::equal(a.valuePtr(), a.valuePtr() + a.nonZeros(), b.valuePtr()) &&
           std::equal(a.innerIndexPtr(), a.innerIndexPtr() + a.nonZeros(), b.innerIndexPtr()) &&
           std::equal(a.outerIndexPtr(), a.outerIndexPtr() + a.outerSize() + 1, b.outerIndexPtr());
}

bool WeightSet::operator==(const WeightSet& o) const
{
    return w == o.w && w_in == o.w_in && w_param == o.w_param && b == o.b && w_out == o.w_out &&
           seed_used == o.seed_used;
}

// --- spectral radius ---------------------------------------------------------

double spectral_radius(const RecurrentMatrix& w, const SpectralRadiusOptions& opt)
{
    const Eigen::Index n = w.size();
    if (n == 0) throw Error(ErrorKind::ConfigError, "spectral_radius of an empty matrix");
    const Eigen::Index m = std::min<Eigen::Index>(n, std::max(1, opt.krylov_dim));
    const std::size_t cap = opt.max_matvecs ? opt.max_matvecs : 10 * static_cast<std::size_t>(n);

    Vector v(n);
    {
        std::mt19937_64 gen(0x5eedULL);
        std::normal_distribution<double> normal;
        for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(gen);
    }
    v.normalize();

    DenseMatrix basis(n, m + 1);
    DenseMatrix hess(m + 1, m);
    Vector work(n);
    std::size_t matvecs = 0;
    double previous = std::numeric_limits<double>::quiet_NaN();
    double best = 0.0;

    while (matvecs < cap) {
        basis.setZero();
        hess.setZero();
        basis.col(0) = v;
        Eigen::Index k = m;
        bool invariant = false;
        for (Eigen::Index j = 0; j < m; ++j) {
            w.multiply(basis.col(j), work);
            ++matvecs;
            const double scale = work.norm();
            // Modified Gram-Schmidt with one reorthogonalization pass.
            for (int pass = 0; pass < 2; ++pass) {
                for (Eigen::Index i = 0; i <= j; ++i) {
                    const double c = basis.col(i).dot(work);
                    hess(i, j) += c;
                    work -= c * basis.col(i);
                }
            }
            const double h = work.norm();
            hess(j + 1, j) = h;
            if (h <= 1e-13 * std::max(scale, 1e-300)) {
                k = j + 1;
                invariant = true;
                break;
            }
            basis.col(j + 1) = work / h;
        }

        Eigen::EigenSolver<DenseMatrix> es(hess.topLeftCorner(k, k), true);
        const auto& vals = es.eigenvalues();
        Eigen::Index top = 0;
        for (Eigen::Index i = 1; i < k; ++i)
            if (std::abs(vals[i]) > std::abs(vals[top])) top = i;
        const double theta = std::abs(vals[top]);
        best = theta;
        if (invariant) return theta;

        Eigen::VectorXcd s = es.eigenvectors().col(top);
        s.normalize();
        const double residual = std::abs(hess(k, k - 1)) * std::abs(s[k - 1]);
        const bool settled = std::isfinite(previous) && std::abs(theta - previous) <= opt.rel_tol * theta;
        if (settled && residual <= 1e-8 * theta) return theta;
        if (theta == 0.0) return 0.0;
        previous = theta;

        // Restart inside the (real) invariant subspace of the dominant Ritz pair.
        const Eigen::VectorXcd y = basis.leftCols(k).cast<std::complex<double>>() * s;
        v = y.real() + y.imag();
        const double nv = v.norm();
        if (!(nv > 0.0)) throw Error(ErrorKind::NonFinite, "spectral_radius restart vector vanished");
        v /= nv;
    }
    throw NoConvergenceError("spectral_radius hit the iteration cap of " + std::to_string(cap) + " products", best);
}

double spectral_radius(const DenseMatrix& w, const SpectralRadiusOptions& opt)
{
    return spectral_radius(RecurrentMatrix(w), opt);
}

// --- initialization -----------------------------------------------------------

namespace {

enum class Stream : std::uint64_t { Recurrent = 1, Input = 2, Param = 3, Bias = 4 };

std::mt19937_64 stream(std::uint64_t seed, Stream which)
{
    return std::mt19937_64(derive_seed(seed, static_cast<std::uint64_t>(which)));
}

Vector uniform_vector(std::size_t n, double chi, std::mt19937_64 gen)
{
    std::uniform_real_distribution<double> dist(-chi, chi);
    Vector v(static_cast<Eigen::Index>(n));
    for (auto& x : v) x = (chi == 0.0) ? 0.0 : dist(gen);
    return v;
}

RecurrentMatrix draw_recurrent(const ReservoirSpec& spec)
{
    const auto n = static_cast<Eigen::Index>(spec.n_units);
    auto gen = stream(spec.seed, Stream::Recurrent);
    if (std::holds_alternative<DenseGaussian>(spec.recurrent_init)) {
        std::normal_distribution<double> normal;
        DenseMatrix m(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) m(i, j) = normal(gen);
        return RecurrentMatrix(std::move(m));
    }
    const double density = std::get<SparseUniform>(spec.recurrent_init).density;
    const auto total = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n);
    const auto count = static_cast<std::uint64_t>(std::llround(density * static_cast<double>(total)));
    // Selection sampling: exactly `count` distinct positions in row-major order.
    std::vector<std::uint64_t> picks;
    picks.reserve(count);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (std::uint64_t pos = 0; pos < total && picks.size() < count; ++pos) {
        const double remaining = static_cast<double>(total - pos);
        const double needed = static_cast<double>(count - picks.size());
        if (remaining * coin(gen) < needed) picks.push_back(pos);
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(picks.size());
    for (auto p : picks)
        triplets.emplace_back(static_cast<Eigen::Index>(p / static_cast<std::uint64_t>(n)),
                              static_cast<Eigen::Index>(p % static_cast<std::uint64_t>(n)), unit(gen));
    SparseMatrix m(n, n);
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();
    return RecurrentMatrix(std::move(m));
}

} // namespace

WeightSet init_weights(const ReservoirSpec& spec)
{
    validate(spec);
    WeightSet ws;
    ws.seed_used = spec.seed;
    ws.w = draw_recurrent(spec);
    const double raw = ws.w.nonzeros() == 0 ? 0.0 : spectral_radius(ws.w);
    if (raw < 1e-12)
        throw Error(ErrorKind::SingularSpectrum,
                    "raw recurrent draw has spectral radius " + std::to_string(raw) + " for seed " +
                        std::to_string(spec.seed));
    ws.w.scale(spec.rho_target / raw);
    if (spec.has_input()) ws.w_in = uniform_vector(spec.n_units, spec.chi_in, stream(spec.seed, Stream::Input));
    if (spec.has_param())
        ws.w_param = uniform_vector(spec.n_units, spec.chi_param, stream(spec.seed, Stream::Param));
    ws.b = uniform_vector(spec.n_units, spec.chi_b, stream(spec.seed, Stream::Bias));
    return ws;
}

WeightSet init_weights_resampling(const ReservoirSpec& spec, int max_attempts)
{
    ReservoirSpec attempt = spec;
    for (int i = 0;; ++i) {
        try {
            return init_weights(attempt);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::SingularSpectrum || i + 1 >= max_attempts) throw;
            ++attempt.seed;
        }
    }
}

// --- dynamics -----------------------------------------------------------------

void step_into(const Vector& u, double y, double p, const WeightSet& ws, const ReservoirSpec& spec, Vector& out)
{
    ws.w.multiply(u, out);
    if (spec.has_input()) out.noalias() += ws.w_in * y;
    if (spec.has_param()) out.noalias() += ws.w_param * p;
    out += ws.b;
    const double a = spec.leak;
    if (spec.activation == Activation::Tanh) {
        out = a * u.array() + (1.0 - a) * out.array().tanh();
    } else {
        out = a * u.array() + (1.0 - a) * out.array();
    }
}

Vector step_slow(const Vector& u, double y, const WeightSet& ws, const ReservoirSpec& spec)
{
    Vector out(u.size());
    step_into(u, y, 0.0, ws, spec, out);
    return out;
}

Vector step_fast(const Vector& u, double y, double i_fast, const WeightSet& ws, const ReservoirSpec& spec)
{
    Vector out(u.size());
    step_into(u, y, i_fast, ws, spec, out);
    return out;
}

Vector step_sdp(const Vector& u, double h, const WeightSet& ws, const ReservoirSpec& spec)
{
    Vector out(u.size());
    step_into(u, 0.0, h, ws, spec, out);
    return out;
}

History run_open_loop(const ReservoirSpec& spec, const WeightSet& ws, const OpenLoopInputs& inputs)
{
    const std::size_t t = spec.has_input() ? inputs.y.size() : inputs.param.size();
    if (t == 0) throw Error(ErrorKind::EmptySeries, "open-loop run needs at least one input");
    if (spec.has_input() && spec.has_param() && inputs.param.size() != t)
        throw Error(ErrorKind::ConfigError, "y and parameter drives differ in length");

    const auto n = static_cast<Eigen::Index>(spec.n_units);
    History hist(static_cast<Eigen::Index>(t), n);
    Vector u = Vector::Zero(n);
    Vector next(n);
    for (std::size_t k = 0; k < t; ++k) {
        const double y = spec.has_input() ? inputs.y[k] : 0.0;
        const double p = spec.has_param() ? inputs.param[k] : 0.0;
        step_into(u, y, p, ws, spec, next);
        u.swap(next);
        hist.row(static_cast<Eigen::Index>(k)) = u.transpose();
    }
    return hist;
}

// --- serialization --------------------------------------------------------------

namespace {
constexpr std::uint32_t kWeightsVersion = 1;
}

void write_weights(std::ostream& os, const ReservoirSpec& spec, const WeightSet& ws)
{
    using namespace binary;
    os.write("SLRW", 4);
    put(os, kWeightsVersion);
    put(os, static_cast<std::uint8_t>(spec.role));
    put<std::uint64_t>(os, spec.n_units);
    put(os, spec.leak);
    put(os, spec.rho_target);
    const bool sparse_init = std::holds_alternative<SparseUniform>(spec.recurrent_init);
    put<std::uint8_t>(os, sparse_init ? 1 : 0);
    put(os, sparse_init ? std::get<SparseUniform>(spec.recurrent_init).density : 0.0);
    put(os, spec.chi_in);
    put(os, spec.chi_param);
    put(os, spec.chi_b);
    put(os, static_cast<std::uint8_t>(spec.activation));
    put(os, spec.seed);
    put(os, ws.seed_used);

    put<std::uint8_t>(os, ws.w.is_sparse() ? 1 : 0);
    put<std::uint64_t>(os, static_cast<std::uint64_t>(ws.w.size()));
    if (ws.w.is_sparse()) {
        const auto& m = ws.w.sparse();
        put<std::uint64_t>(os, static_cast<std::uint64_t>(m.nonZeros()));
        for (Eigen::Index r = 0; r < m.outerSize(); ++r)
            for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
                put<std::uint32_t>(os, static_cast<std::uint32_t>(it.row()));
                put<std::uint32_t>(os, static_cast<std::uint32_t>(it.col()));
                put(os, it.value());
            }
    } else {
        const auto& m = ws.w.dense();
        os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    }
    put_vector(os, ws.w_in);
    put_vector(os, ws.w_param);
    put_vector(os, ws.b);
    put_vector(os, ws.w_out);
    if (!os) throw Error(ErrorKind::Io, "failed writing weight bundle");
}

std::pair<ReservoirSpec, WeightSet> read_weights(std::istream& is)
{
    using namespace binary;
    expect_magic(is, "SLRW");
    if (get<std::uint32_t>(is) != kWeightsVersion) throw Error(ErrorKind::Io, "unsupported weight bundle version");
    ReservoirSpec spec;
    spec.role = static_cast<ReservoirRole>(get<std::uint8_t>(is));
    spec.n_units = get<std::uint64_t>(is);
    spec.leak = get<double>(is);
    spec.rho_target = get<double>(is);
    const bool sparse_init = get<std::uint8_t>(is) != 0;
    const double density = get<double>(is);
    spec.recurrent_init = sparse_init ? RecurrentInit{SparseUniform{density}} : RecurrentInit{DenseGaussian{}};
    spec.chi_in = get<double>(is);
    spec.chi_param = get<double>(is);
    spec.chi_b = get<double>(is);
    spec.activation = static_cast<Activation>(get<std::uint8_t>(is));
    spec.seed = get<std::uint64_t>(is);

    WeightSet ws;
    ws.seed_used = get<std::uint64_t>(is);
    const bool sparse = get<std::uint8_t>(is) != 0;
    const auto n = static_cast<Eigen::Index>(get<std::uint64_t>(is));
    if (sparse) {
        const auto nnz = get<std::uint64_t>(is);
        std::vector<Eigen::Triplet<double>> triplets;
        triplets.reserve(nnz);
        for (std::uint64_t i = 0; i < nnz; ++i) {
            const auto r = get<std::uint32_t>(is);
            const auto c = get<std::uint32_t>(is);
            triplets.emplace_back(r, c, get<double>(is));
        }
        SparseMatrix m(n, n);
        m.setFromTriplets(triplets.begin(), triplets.end());
        m.makeCompressed();
        ws.w = RecurrentMatrix(std::move(m));
    } else {
        DenseMatrix m(n, n);
        is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
        if (!is) throw Error(ErrorKind::Io, "truncated weight bundle");
        ws.w = RecurrentMatrix(std::move(m));
    }
    ws.w_in = get_vector(is);
    ws.w_param = get_vector(is);
    ws.b = get_vector(is);
    ws.w_out = get_vector(is);
    return {spec, ws};
}

} // namespace slowres
