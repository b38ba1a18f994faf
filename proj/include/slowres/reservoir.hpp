#pragma once

// Echo-state reservoir cores: the slow reservoir, the fast reservoir and the
// slow dynamics predictor share one leaky-tanh update with role-dependent
// input channels.

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <variant>

namespace slowres {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
/// Time-major state history: row k is the state after consuming input k.
using History = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation : std::uint8_t { Tanh = 0, Identity = 1 };

/// Which input channels a reservoir owns: slow has y only, fast has y and the
/// slow parameter, the predictor has the parameter only.
enum class ReservoirRole : std::uint8_t { Slow = 0, Fast = 1, Sdp = 2 };

struct DenseGaussian {};
struct SparseUniform {
    double density = 0.02;
};
using RecurrentInit = std::variant<DenseGaussian, SparseUniform>;

struct ReservoirSpec {
    ReservoirRole role = ReservoirRole::Slow;
    std::size_t n_units = 500;
    double leak = 0.995;
    double rho_target = 1.0;
    RecurrentInit recurrent_init = DenseGaussian{};
    double chi_in = 0.5;
    double chi_param = 0.0;
    double chi_b = 5.0;
    Activation activation = Activation::Tanh;
    std::uint64_t seed = 1;

    /// N=500, leak 0.995, rho 1, dense Gaussian; input scalings for Lorenz data.
    static ReservoirSpec slow_default();
    /// N=2000, leak 0.95, rho 0.95, 2% sparse uniform.
    static ReservoirSpec fast_default();
    /// N=500, no leak, tiny parameter/bias scalings, 2% sparse uniform at rho 0.95.
    static ReservoirSpec sdp_default();

    bool has_input() const { return role != ReservoirRole::Sdp; }
    bool has_param() const { return role != ReservoirRole::Slow; }
};

/// Throws ConfigError when a field is out of range.
void validate(const ReservoirSpec& spec);

/// Recurrent weights stored densely or in CSR form.
class RecurrentMatrix {
public:
    RecurrentMatrix() = default;
    explicit RecurrentMatrix(DenseMatrix m) : m_(std::move(m)) {}
    explicit RecurrentMatrix(SparseMatrix m) : m_(std::move(m)) {}

    Eigen::Index size() const;
    bool is_sparse() const { return std::holds_alternative<SparseMatrix>(m_); }
    Eigen::Index nonzeros() const;

    /// out = W * x (out must not alias x).
    void multiply(const Vector& x, Vector& out) const;
    Vector operator*(const Vector& x) const;

    void scale(double factor);
    DenseMatrix to_dense() const;

    const DenseMatrix& dense() const { return std::get<DenseMatrix>(m_); }
    const SparseMatrix& sparse() const { return std::get<SparseMatrix>(m_); }

    bool operator==(const RecurrentMatrix& other) const;

private:
    std::variant<DenseMatrix, SparseMatrix> m_;
};

struct WeightSet {
    RecurrentMatrix w;
    Vector w_in;     ///< empty for the slow dynamics predictor
    Vector w_param;  ///< empty for the slow reservoir
    Vector b;
    Vector w_out;    ///< empty until a readout is fitted
    std::uint64_t seed_used = 0;

    bool operator==(const WeightSet& other) const;
};

/// Draws all matrices from `spec.seed` and rescales W to `spec.rho_target`.
/// Throws SingularSpectrum when the raw draw has (numerically) zero spectral radius.
WeightSet init_weights(const ReservoirSpec& spec);

/// Like init_weights, but on SingularSpectrum retries with seed+1, seed+2, ...
/// `seed_used` records the seed that succeeded.
WeightSet init_weights_resampling(const ReservoirSpec& spec, int max_attempts = 16);

struct SpectralRadiusOptions {
    double rel_tol = 1e-10;
    std::size_t max_matvecs = 0;  ///< 0 means 10 * N
    int krylov_dim = 64;
};

/// Magnitude of the dominant eigenvalue by restarted Arnoldi (power iteration
/// on a Krylov block, so complex-conjugate dominant pairs converge as well).
/// Throws NoConvergenceError carrying the best estimate when the cap is reached.
double spectral_radius(const RecurrentMatrix& w, const SpectralRadiusOptions& opt = {});
double spectral_radius(const DenseMatrix& w, const SpectralRadiusOptions& opt = {});

/// u' = a*u + (1-a) * act(W u + W_in y + W_param p + b), written into `out`.
/// Channels the reservoir does not own are ignored. `out` must not alias `u`.
void step_into(const Vector& u, double y, double p, const WeightSet& ws, const ReservoirSpec& spec, Vector& out);

Vector step_slow(const Vector& u, double y, const WeightSet& ws, const ReservoirSpec& spec);
Vector step_fast(const Vector& u, double y, double i_fast, const WeightSet& ws, const ReservoirSpec& spec);
Vector step_sdp(const Vector& u, double h, const WeightSet& ws, const ReservoirSpec& spec);

/// Drives for an open-loop run; channels the reservoir does not own stay empty.
struct OpenLoopInputs {
    std::span<const double> y;
    std::span<const double> param;
};

/// Iterates the reservoir from u(0) = 0 and returns the T x N history.
History run_open_loop(const ReservoirSpec& spec, const WeightSet& ws, const OpenLoopInputs& inputs);

/// Host-endian binary bundle: magic, version, spec, seed and all matrices.
void write_weights(std::ostream& os, const ReservoirSpec& spec, const WeightSet& ws);
std::pair<ReservoirSpec, WeightSet> read_weights(std::istream& is);

} // namespace slowres
