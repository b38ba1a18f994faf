#include "slowres/training.hpp"

#include "slowres/binary.hpp"
#include "slowres/error.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <future>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

namespace slowres {

RidgeFit ridge_fit(const Eigen::Ref<const History>& states, std::span<const double> targets, double beta)
{
    const Eigen::Index t = states.rows();
    const Eigen::Index n = states.cols();
    if (t == 0 || n == 0) throw Error(ErrorKind::EmptySeries, "ridge_fit needs a nonempty state matrix");
    if (static_cast<std::size_t>(t) != targets.size())
        throw Error(ErrorKind::ConfigError, "ridge_fit states and targets differ in length");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error(ErrorKind::ConfigError, "ridge beta must be >= 0");

    DenseMatrix gram = DenseMatrix::Zero(n, n);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(states.transpose());
    gram.diagonal().array() += beta;
    const Eigen::Map<const Vector> y(targets.data(), t);
    const Vector rhs = states.transpose() * y;

    Eigen::LLT<DenseMatrix, Eigen::Lower> llt(gram);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorKind::IllConditioned, "regularized Gram matrix is not positive definite; increase beta");
    const double rcond = llt.rcond();
    const double condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    if (!(condition <= kMaxRidgeCondition))
        throw Error(ErrorKind::IllConditioned,
                    "Gram condition estimate " + std::to_string(condition) + " exceeds 1e12; increase beta");
    return {llt.solve(rhs), condition};
}

std::vector<double> apply_readout(const Eigen::Ref<const History>& states, const Vector& w)
{
    const Vector p = states * w;
    return {p.data(), p.data() + p.size()};
}

double nmse(std::span<const double> targets, std::span<const double> predictions)
{
    if (targets.empty() || targets.size() != predictions.size())
        throw Error(ErrorKind::ConfigError, "nmse needs equal-length nonempty series");
    const double count = static_cast<double>(targets.size());
    const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / count;
    double mse = 0.0, var = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double e = targets[i] - predictions[i];
        mse += e * e;
        var += (targets[i] - mean) * (targets[i] - mean);
    }
    mse /= count;
    var /= count;
    if (var > 1e-300) return mse / var;
    return mean != 0.0 ? mse / (mean * mean) : mse;
}

void validate(const PipelineConfig& cfg)
{
    auto fail = [](const std::string& what) { throw Error(ErrorKind::ConfigError, what); };
    validate(cfg.slow);
    validate(cfg.fast);
    validate(cfg.sdp);
    if (cfg.slow.role != ReservoirRole::Slow || cfg.fast.role != ReservoirRole::Fast ||
        cfg.sdp.role != ReservoirRole::Sdp)
        fail("pipeline reservoirs have the wrong roles");
    if (cfg.washout_n == 0) fail("washout_n must be >= 1");
    if (!(cfg.washout_n < cfg.switchover_n)) fail("washout_n must be < switchover_n");
    if (cfg.switchover_n - cfg.washout_n < cfg.window) fail("training range shorter than the moving-average window");
    if (cfg.window == 0) fail("window must be >= 1");
    if (!(cfg.fraction > 0.0 && cfg.fraction <= 1.0)) fail("fraction must lie in (0, 1]");
    if (!(cfg.tau_f >= 1.0)) fail("tau_f must be >= 1");
    if (!(cfg.beta_fast >= 0.0) || !(cfg.beta_sdp >= 0.0)) fail("beta must be >= 0");
    if (std::isnan(cfg.saturation_tol)) fail("saturation_tol must be a number");
}

bool TrainedModel::operator==(const TrainedModel& o) const
{
    auto same_spec = [](const ReservoirSpec& a, const ReservoirSpec& b) {
        return a.role == b.role && a.n_units == b.n_units && a.leak == b.leak && a.rho_target == b.rho_target &&
               a.recurrent_init.index() == b.recurrent_init.index() &&
               (!std::holds_alternative<SparseUniform>(a.recurrent_init) ||
                std::get<SparseUniform>(a.recurrent_init).density == std::get<SparseUniform>(b.recurrent_init).density) &&
               a.chi_in == b.chi_in && a.chi_param == b.chi_param && a.chi_b == b.chi_b &&
               a.activation == b.activation && a.seed == b.seed;
    };
    return same_spec(slow_spec, o.slow_spec) && same_spec(fast_spec, o.fast_spec) && same_spec(sdp_spec, o.sdp_spec) &&
           slow == o.slow && fast == o.fast && sdp == o.sdp && selection.indices == o.selection.indices &&
           selection.sds == o.selection.sds && selection.saturated == o.selection.saturated &&
           selection.window == o.selection.window &&
           selection.range.begin == o.selection.range.begin && selection.range.end == o.selection.range.end &&
           tau_f == o.tau_f && h_offset == o.h_offset && h_scale == o.h_scale && washout_n == o.washout_n && switchover_n == o.switchover_n &&
           config_echo == o.config_echo;
}

TrainResult train_pipeline(std::span<const double> y_all, const PipelineConfig& cfg)
{
    validate(cfg);
    if (y_all.size() < cfg.switchover_n)
        throw Error(ErrorKind::ConfigError, "observation series shorter than switchover_n");
    const std::span<const double> y = y_all.first(cfg.switchover_n);
    const std::size_t t = y.size();

    TrainResult out;
    TrainedModel& model = out.model;
    model.slow_spec = cfg.slow;
    model.fast_spec = cfg.fast;
    model.sdp_spec = cfg.sdp;
    model.tau_f = cfg.tau_f;
    model.washout_n = cfg.washout_n;
    model.switchover_n = cfg.switchover_n;
    model.slow = init_weights_resampling(cfg.slow);
    model.fast = init_weights_resampling(cfg.fast);
    model.sdp = init_weights_resampling(cfg.sdp);

    // (1)-(3): slow reservoir, slow-node selection on the training range, smoothing.
    std::vector<double> u_tilde;
    {
        const History slow_hist = run_open_loop(cfg.slow, model.slow, {y, {}});
        model.selection = select_slow_nodes(slow_hist, cfg.window, cfg.fraction, {cfg.washout_n, cfg.switchover_n},
                                            cfg.saturation_tol);
        u_tilde = extract_feature(slow_hist, model.selection);
    }
    std::vector<double> h_raw = smooth(u_tilde, cfg.tau_f);
    if (cfg.standardize_h) {
        const auto fit_range = std::span<const double>(h_raw).subspan(cfg.washout_n);
        const double mean = std::accumulate(fit_range.begin(), fit_range.end(), 0.0) / static_cast<double>(fit_range.size());
        double ss = 0.0;
        for (double v : fit_range) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / static_cast<double>(fit_range.size()));
        if (!(sd > 0.0)) throw Error(ErrorKind::DegenerateRange, "slow feature is constant on the training range");
        model.h_offset = mean;
        model.h_scale = sd;
    }
    std::vector<double> h(h_raw.size());
    for (std::size_t n = 0; n < h.size(); ++n) h[n] = (h_raw[n] - model.h_offset) / model.h_scale;

    // (4)-(5): fast reservoir on (y, h), predictor on h.
    const History fast_hist = run_open_loop(cfg.fast, model.fast, {y, h});
    const History sdp_hist = run_open_loop(cfg.sdp, model.sdp, {{}, h});

    // (6): row k is the state after input k and predicts step k + 1.
    const auto first_row = static_cast<Eigen::Index>(cfg.washout_n - 1);
    const auto rows = static_cast<Eigen::Index>(cfg.switchover_n - cfg.washout_n);
    const std::span<const double> y_targets = y.subspan(cfg.washout_n);
    const std::span<const double> h_targets = std::span<const double>(h).subspan(cfg.washout_n);

    auto fast_job = std::async(std::launch::async, [&] {
        return ridge_fit(fast_hist.middleRows(first_row, rows), y_targets, cfg.beta_fast);
    });
    const RidgeFit sdp_fit = ridge_fit(sdp_hist.middleRows(first_row, rows), h_targets, cfg.beta_sdp);
    const RidgeFit fast_fit = fast_job.get();
    model.fast.w_out = fast_fit.w;
    model.sdp.w_out = sdp_fit.w;
    out.condition_fast = fast_fit.condition;
    out.condition_sdp = sdp_fit.condition;

    OpenLoopTrace& trace = out.trace;
    trace.u_tilde = std::move(u_tilde);
    trace.h = std::move(h_raw);
    trace.h_in = std::move(h);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    trace.y_fit.assign(t, nan);
    trace.h_fit.assign(t, nan);
    const auto y_fit = apply_readout(fast_hist.middleRows(first_row, rows), fast_fit.w);
    const auto h_fit = apply_readout(sdp_hist.middleRows(first_row, rows), sdp_fit.w);
    std::copy(y_fit.begin(), y_fit.end(), trace.y_fit.begin() + static_cast<std::ptrdiff_t>(cfg.washout_n));
    std::copy(h_fit.begin(), h_fit.end(), trace.h_fit.begin() + static_cast<std::ptrdiff_t>(cfg.washout_n));
    trace.fast_state = fast_hist.row(static_cast<Eigen::Index>(t) - 1).transpose();
    trace.sdp_state = sdp_hist.row(static_cast<Eigen::Index>(t) - 1).transpose();

    out.nmse_fast = nmse(y_targets, y_fit);
    out.nmse_sdp = nmse(h_targets, h_fit);
    return out;
}

RidgeFit supervised_param_fit(const Eigen::Ref<const History>& history, std::span<const double> lambda_true,
                              double beta)
{
    if (static_cast<std::size_t>(history.rows()) != lambda_true.size())
        throw Error(ErrorKind::ConfigError, "history and parameter series differ in length");
    return ridge_fit(history, lambda_true, beta);
}

// --- model bundle ---------------------------------------------------------------

namespace {
constexpr std::uint32_t kModelVersion = 1;

void put_sizes(std::ostream& os, const std::vector<std::size_t>& v)
{
    binary::put<std::uint64_t>(os, v.size());
    for (auto x : v) binary::put<std::uint64_t>(os, x);
}

std::vector<std::size_t> get_sizes(std::istream& is)
{
    std::vector<std::size_t> v(binary::get<std::uint64_t>(is));
    for (auto& x : v) x = binary::get<std::uint64_t>(is);
    return v;
}
} // namespace

void write_model(std::ostream& os, const TrainedModel& m)
{
    using namespace binary;
    os.write("SLRM", 4);
    put(os, kModelVersion);
    write_weights(os, m.slow_spec, m.slow);
    write_weights(os, m.fast_spec, m.fast);
    write_weights(os, m.sdp_spec, m.sdp);
    put_sizes(os, m.selection.indices);
    put<std::uint64_t>(os, m.selection.sds.size());
    for (double s : m.selection.sds) put(os, s);
    put<std::uint64_t>(os, m.selection.saturated.size());
    for (bool b : m.selection.saturated) put<std::uint8_t>(os, b ? 1 : 0);
    put<std::uint64_t>(os, m.selection.window);
    put<std::uint64_t>(os, m.selection.range.begin);
    put<std::uint64_t>(os, m.selection.range.end);
    put(os, m.tau_f);
    put(os, m.h_offset);
    put(os, m.h_scale);
    put<std::uint64_t>(os, m.washout_n);
    put<std::uint64_t>(os, m.switchover_n);
    put_string(os, m.config_echo);
    if (!os) throw Error(ErrorKind::Io, "failed writing model bundle");
}

TrainedModel read_model(std::istream& is)
{
    using namespace binary;
    expect_magic(is, "SLRM");
    if (get<std::uint32_t>(is) != kModelVersion) throw Error(ErrorKind::Io, "unsupported model bundle version");
    TrainedModel m;
    std::tie(m.slow_spec, m.slow) = read_weights(is);
    std::tie(m.fast_spec, m.fast) = read_weights(is);
    std::tie(m.sdp_spec, m.sdp) = read_weights(is);
    m.selection.indices = get_sizes(is);
    m.selection.sds.resize(get<std::uint64_t>(is));
    for (auto& s : m.selection.sds) s = get<double>(is);
    m.selection.saturated.resize(get<std::uint64_t>(is));
    for (std::size_t i = 0; i < m.selection.saturated.size(); ++i) m.selection.saturated[i] = get<std::uint8_t>(is) != 0;
    m.selection.window = get<std::uint64_t>(is);
    m.selection.range.begin = get<std::uint64_t>(is);
    m.selection.range.end = get<std::uint64_t>(is);
    m.tau_f = get<double>(is);
    m.h_offset = get<double>(is);
    m.h_scale = get<double>(is);
    m.washout_n = get<std::uint64_t>(is);
    m.switchover_n = get<std::uint64_t>(is);
    m.config_echo = get_string(is);
    return m;
}

} // namespace slowres
