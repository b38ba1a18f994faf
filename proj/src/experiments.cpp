#include "slowres/experiments.hpp"

#include "slowres/error.hpp"
#include "slowres/io.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <future>
#include <tuple>

namespace slowres {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::span<const double> slice(const std::vector<double>& v, std::size_t begin, std::size_t end)
{
    return std::span<const double>(v).subspan(begin, end - begin);
}

/// Output directory that is created fresh and filled once; every file is hashed
/// into the manifest written last.
class RunDir {
public:
    explicit RunDir(fs::path dir) : dir_(std::move(dir))
    {
        std::error_code ec;
        if (fs::exists(dir_, ec) && !(fs::is_directory(dir_, ec) && fs::is_empty(dir_, ec)))
            throw Error(ErrorKind::ConfigError, "output directory " + dir_.string() + " exists and is not empty");
        fs::create_directories(dir_, ec);
        if (ec) throw Error(ErrorKind::Io, "cannot create " + dir_.string() + ": " + ec.message());
    }

    void write(const std::string& name, const std::function<void(std::ostream&)>& body)
    {
        const fs::path p = dir_ / name;
        {
            std::ofstream os(p, std::ios::binary);
            if (!os) throw Error(ErrorKind::Io, "cannot open " + p.string());
            body(os);
            os.flush();
            if (!os) throw Error(ErrorKind::Io, "write failed for " + p.string());
        }
        artifacts_[name] = sha256_file(p);
    }

    void finish(Command c, const ExperimentConfig& cfg, const json& report)
    {
        write("report.json", [&](std::ostream& os) { os << report.dump(2) << '\n'; });
        json m = {
            {"manifest_version", kManifestVersion},
            {"command", std::string(to_string(c))},
            {"config", to_json(cfg)},
            {"seeds",
             {{"master", cfg.seed},
              {"slow", cfg.pipeline.slow.seed},
              {"fast", cfg.pipeline.fast.seed},
              {"sdp", cfg.pipeline.sdp.seed}}},
            {"artifacts", artifacts_},
        };
        const fs::path p = dir_ / "manifest.json";
        std::ofstream os(p, std::ios::binary);
        os << m.dump(2) << '\n';
        if (!os) throw Error(ErrorKind::Io, "write failed for " + p.string());
    }

private:
    fs::path dir_;
    json artifacts_ = json::object();
};

json trajectory_summary(const Trajectory& tr)
{
    const auto [lo, hi] = std::minmax_element(tr.lambdas.begin(), tr.lambdas.end());
    return {{"n_samples", tr.size()}, {"dt_obs", tr.dt_obs}, {"lambda_min", *lo}, {"lambda_max", *hi}};
}

json opt_index(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

} // namespace

// --- runners -----------------------------------------------------------------

Exp1Result run_exp1(const ExperimentConfig& cfg)
{
    validate(cfg, Command::Exp1);
    Exp1Result r;
    r.trajectory = generate(cfg.system, cfg.schedule, generate_options(cfg));
    const auto& spec = cfg.pipeline.slow;
    const WeightSet ws = init_weights_resampling(spec);
    const History h = run_open_loop(spec, ws, {r.trajectory.y, {}});

    const std::size_t n = r.trajectory.size();
    const IndexRange range{cfg.exp1.transient, n};
    r.selection = select_slow_nodes(h, cfg.pipeline.window, cfg.pipeline.fraction, range, cfg.pipeline.saturation_tol);
    r.degenerate = r.selection.indices.size() == spec.n_units;
    r.feature.tau_f = cfg.pipeline.tau_f;
    r.feature.raw = extract_feature(h, r.selection);
    r.feature.smoothed = smooth(r.feature.raw, cfg.pipeline.tau_f);

    std::vector<double> neg(r.feature.raw.begin() + static_cast<std::ptrdiff_t>(range.begin), r.feature.raw.end());
    for (double& v : neg) v = -v;
    const auto lam = slice(r.trajectory.lambdas, range.begin, n);
    r.r = pearson(neg, lam);
    std::vector<double> neg_s(r.feature.smoothed.begin() + static_cast<std::ptrdiff_t>(range.begin),
                              r.feature.smoothed.end());
    for (double& v : neg_s) v = -v;
    r.r_smoothed = pearson(neg_s, lam);
    return r;
}

std::vector<LleProbe> lle_sweep(const Exp2Result& r, const LleConfig& lc, double dt_obs)
{
    const FrozenFastMap map(r.train.model, lc.paper_exact);
    std::vector<std::future<LleProbe>> jobs;
    for (std::size_t probe : lc.probes) {
        if (probe <= r.start.n || probe - r.start.n - 1 >= static_cast<std::size_t>(r.rollout.fast_states.rows()))
            throw Error(ErrorKind::ConfigError, "LLE probe " + std::to_string(probe) + " lies outside the rollout");
        const std::size_t k = probe - r.start.n - 1;
        jobs.push_back(std::async(std::launch::async, [&, probe, k] {
            const Vector u0 = r.rollout.fast_states.row(static_cast<Eigen::Index>(k)).transpose();
            LleProbe p;
            p.probe_n = probe;
            p.i_fast = r.rollout.h_hat[k];
            p.estimate = lle(map, p.i_fast, u0, lc.transient_steps + lc.measured_steps, lc.transient_steps,
                             lc.renorm_interval, dt_obs);
            return p;
        }));
    }
    std::vector<LleProbe> out;
    for (auto& j : jobs) out.push_back(j.get());
    return out;
}

Exp2Result run_exp2(const ExperimentConfig& cfg, bool with_lle, bool with_source_reference)
{
    validate(cfg, Command::Exp2);
    Exp2Result r;
    r.trajectory = generate(cfg.system, cfg.schedule, generate_options(cfg));
    const auto& y = r.trajectory.y;
    const auto& pc = cfg.pipeline;

    // Training only ever sees the prefix up to switchover.
    r.train = train_pipeline(std::span<const double>(y).first(pc.switchover_n), pc);
    r.start = switchover(r.train.model, r.train.trace.fast_state, r.train.trace.sdp_state, pc.switchover_n);
    RolloutOptions ro;
    ro.fresh_h = cfg.rollout.fresh_h;
    r.rollout = rollout(r.start, r.train.model, cfg.rollout.end_n - pc.switchover_n, ro);

    r.train_variance = variance(slice(y, pc.washout_n, pc.switchover_n));
    const auto c = collapse_index(r.rollout.y_hat, cfg.rollout.collapse_width,
                                  cfg.rollout.collapse_fraction * r.train_variance);
    if (c) r.collapse_n = *c + r.start.n + 1;
    r.nmse_closed = nmse(slice(y, r.start.n + 1, cfg.rollout.end_n + 1), r.rollout.y_hat);

    if (const auto* lz = std::get_if<Lorenz>(&cfg.system); lz && r.collapse_n) {
        FixedPointCheck fp;
        fp.lambda_terminal = eval_schedule(cfg.schedule, static_cast<double>(cfg.rollout.end_n) * cfg.integration.dt_obs);
        if (fp.lambda_terminal > 1.0) {
            fp.expected_abs = std::sqrt(lz->b * (fp.lambda_terminal - 1.0));
            fp.observed = r.rollout.y_hat.back();
            fp.rel_error = std::abs(std::abs(fp.observed) - fp.expected_abs) / fp.expected_abs;
            r.fixed_point = fp;
        }
    }

    if (with_lle) r.probes = lle_sweep(r, cfg.lle, cfg.integration.dt_obs);
    if (with_source_reference && cfg.lle.source_t_total > 0.0) {
        const double dt = cfg.integration.dt_obs / cfg.integration.substeps;
        std::vector<std::future<SourceReference>> jobs;
        for (std::size_t probe : cfg.lle.probes) {
            const double lam = r.trajectory.lambdas[probe];
            jobs.push_back(std::async(std::launch::async, [&cfg, lam, dt] {
                return SourceReference{lam, source_lle(cfg.system, lam, cfg.lle.source_t_total, dt)};
            }));
        }
        for (auto& j : jobs) r.source.push_back(j.get());
    }
    return r;
}

AblationResult run_ablation(const ExperimentConfig& cfg, const Trajectory& tr)
{
    validate(cfg, Command::Ablation);
    if (tr.lambdas.size() != tr.y.size() || tr.y.empty())
        throw Error(ErrorKind::ConfigError, "ablation needs the lambda ground truth for every observation");
    const std::size_t n = tr.size();
    const std::size_t first = cfg.exp1.transient;
    const std::size_t split = cfg.ablation.split;
    if (!(first < split && split < n))
        throw Error(ErrorKind::ConfigError, "ablation needs exp1.transient < ablation.split < n_samples");
    const auto lam_fit = slice(tr.lambdas, first, split);
    const auto lam_test = slice(tr.lambdas, split, n);

    auto fit_nmse = [&](const ReservoirSpec& spec) {
        const WeightSet ws = init_weights_resampling(spec);
        const History h = run_open_loop(spec, ws, {tr.y, {}});
        const auto fit_rows = h.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(split - first));
        const auto test_rows = h.middleRows(static_cast<Eigen::Index>(split), static_cast<Eigen::Index>(n - split));
        const RidgeFit fit = supervised_param_fit(fit_rows, lam_fit, cfg.ablation.beta);
        return std::pair{nmse(lam_fit, apply_readout(fit_rows, fit.w)), nmse(lam_test, apply_readout(test_rows, fit.w))};
    };
    ReservoirSpec tanh_spec = cfg.pipeline.slow;
    tanh_spec.activation = Activation::Tanh;
    ReservoirSpec id_spec = tanh_spec;
    id_spec.activation = Activation::Identity;

    AblationResult a;
    auto id_job = std::async(std::launch::async, fit_nmse, id_spec);
    std::tie(a.nmse_tanh_in_sample, a.nmse_tanh) = fit_nmse(tanh_spec);
    std::tie(a.nmse_identity_in_sample, a.nmse_identity) = id_job.get();
    a.ratio = a.nmse_identity / a.nmse_tanh;
    return a;
}

AblationResult run_ablation(const ExperimentConfig& cfg)
{
    validate(cfg, Command::Ablation);
    return run_ablation(cfg, generate(cfg.system, cfg.schedule, generate_options(cfg)));
}

// --- commands ----------------------------------------------------------------

json cmd_generate(const ExperimentConfig& cfg, const fs::path& out)
{
    validate(cfg, Command::Generate);
    const Trajectory tr = generate(cfg.system, cfg.schedule, generate_options(cfg));
    RunDir dir(out);
    dir.write("trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, tr); });
    const json report = {{"command", "generate"}, {"trajectory", trajectory_summary(tr)}};
    dir.finish(Command::Generate, cfg, report);
    return report;
}

json cmd_exp1(const ExperimentConfig& cfg, const fs::path& out)
{
    const Exp1Result r = run_exp1(cfg);
    RunDir dir(out);
    dir.write("trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, r.trajectory); });
    dir.write("slowfeat.csv", [&](std::ostream& os) { write_slowfeat_csv(os, r.feature, r.trajectory.lambdas); });
    dir.write("selection.csv", [&](std::ostream& os) {
        os << "rank,node,sd,saturated\n";
        for (std::size_t k = 0; k < r.selection.indices.size(); ++k) {
            const std::size_t i = r.selection.indices[k];
            os << k << ',' << i << ',' << fmt17(r.selection.sds[i]) << ',' << int(r.selection.saturated[i]) << '\n';
        }
    });
    std::size_t saturated = 0;
    for (bool s : r.selection.saturated) saturated += s;
    json report = {
        {"command", "exp1"},
        {"trajectory", trajectory_summary(r.trajectory)},
        {"range", {r.selection.range.begin, r.selection.range.end}},
        {"selected_nodes", r.selection.indices.size()},
        {"saturated_nodes", saturated},
        {"r", r.r},
        {"abs_r", std::abs(r.r)},
        {"r_smoothed", r.r_smoothed},
        {"degenerate_selection", r.degenerate},
    };
    if (r.degenerate) report["note"] = "fraction selects every node; the feature is the whole-reservoir mean";
    dir.finish(Command::Exp1, cfg, report);
    return report;
}

namespace {

json exp2_report(const ExperimentConfig& cfg, const Exp2Result& r)
{
    json probes = json::array();
    for (std::size_t i = 0; i < r.probes.size(); ++i) {
        const auto& p = r.probes[i];
        json e = {{"probe_n", p.probe_n},
                  {"i_fast", p.i_fast},
                  {"lambda_true", r.trajectory.lambdas[p.probe_n]},
                  {"lle_per_step", p.estimate.per_step},
                  {"lle_per_time_unit", p.estimate.per_time_unit}};
        if (i < r.source.size()) e["source_lle_per_time_unit"] = r.source[i].lle;
        probes.push_back(e);
    }
    json report = {
        {"washout_n", cfg.pipeline.washout_n},
        {"switchover_n", cfg.pipeline.switchover_n},
        {"end_n", cfg.rollout.end_n},
        {"nmse_fast_train", r.train.nmse_fast},
        {"nmse_sdp_train", r.train.nmse_sdp},
        {"condition_fast", r.train.condition_fast},
        {"condition_sdp", r.train.condition_sdp},
        {"h_offset", r.train.model.h_offset},
        {"h_scale", r.train.model.h_scale},
        {"train_variance", r.train_variance},
        {"collapse_n", opt_index(r.collapse_n)},
        {"nmse_closed", r.nmse_closed},
        {"lle_probes", probes},
        {"paper_exact_jacobian", cfg.lle.paper_exact},
    };
    if (r.fixed_point) {
        const auto& fp = *r.fixed_point;
        report["fixed_point"] = {{"lambda_terminal", fp.lambda_terminal},
                                 {"expected_abs", fp.expected_abs},
                                 {"observed", fp.observed},
                                 {"rel_error", fp.rel_error}};
    }
    return report;
}

void write_embed_csv(std::ostream& os, const Exp2Result& r, const ExperimentConfig& cfg)
{
    const FrozenFastMap map(r.train.model, cfg.lle.paper_exact);
    const auto& ec = cfg.embed;
    os << "probe_n,k";
    for (std::size_t d = 0; d < ec.dim; ++d) os << ",e" << d + 1;
    os << '\n';
    for (const auto& p : r.probes) {
        const std::size_t k = p.probe_n - r.start.n - 1;
        const Vector u0 = r.rollout.fast_states.row(static_cast<Eigen::Index>(k)).transpose();
        const auto orbit = frozen_orbit(map, p.i_fast, u0, cfg.lle.transient_steps + ec.steps);
        const History e = delay_embed(std::span<const double>(orbit).last(ec.steps), ec.dim, ec.lag);
        for (Eigen::Index i = 0; i < e.rows(); ++i) {
            os << p.probe_n << ',' << i;
            for (Eigen::Index d = 0; d < e.cols(); ++d) os << ',' << fmt17(e(i, d));
            os << '\n';
        }
    }
}

void write_fit_csv(std::ostream& os, const Exp2Result& r)
{
    const auto& t = r.train.trace;
    os << "n,y,y_fit,h,h_in,h_fit,lambda_true\n";
    for (std::size_t n = 0; n < t.u_tilde.size(); ++n)
        os << n << ',' << fmt17(r.trajectory.y[n]) << ',' << fmt17(t.y_fit[n]) << ',' << fmt17(t.h[n]) << ','
           << fmt17(t.h_in[n]) << ',' << fmt17(t.h_fit[n]) << ',' << fmt17(r.trajectory.lambdas[n]) << '\n';
}

void write_exp2_common(RunDir& dir, const Exp2Result& r)
{
    dir.write("trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, r.trajectory); });
    dir.write("fit.csv", [&](std::ostream& os) { write_fit_csv(os, r); });
    dir.write("prediction.csv", [&](std::ostream& os) {
        write_prediction_csv(os, r.trajectory.y, r.train.trace.h_in, r.start, r.rollout);
    });
    dir.write("lle.csv", [&](std::ostream& os) { write_lle_csv(os, r.probes); });
}

} // namespace

json cmd_exp2(const ExperimentConfig& cfg, const fs::path& out)
{
    const Exp2Result r = run_exp2(cfg, true, false);
    RunDir dir(out);
    write_exp2_common(dir, r);
    dir.write("embed.csv", [&](std::ostream& os) { write_embed_csv(os, r, cfg); });
    dir.write("model.bin", [&](std::ostream& os) { write_model(os, r.train.model); });
    json report = exp2_report(cfg, r);
    report["command"] = "exp2";
    dir.finish(Command::Exp2, cfg, report);
    return report;
}

json cmd_lle(const ExperimentConfig& cfg, const fs::path& out)
{
    const Exp2Result r = run_exp2(cfg, true, true);
    RunDir dir(out);
    write_exp2_common(dir, r);
    dir.write("lle_reference.csv", [&](std::ostream& os) {
        os << "probe_n,lambda_true,source_lle_per_time_unit,lle_per_time_unit\n";
        for (std::size_t i = 0; i < r.probes.size() && i < r.source.size(); ++i)
            os << r.probes[i].probe_n << ',' << fmt17(r.source[i].lambda) << ',' << fmt17(r.source[i].lle) << ','
               << fmt17(r.probes[i].estimate.per_time_unit) << '\n';
    });
    json report = exp2_report(cfg, r);
    report["command"] = "lle";
    dir.finish(Command::Lle, cfg, report);
    return report;
}

json cmd_ablation(const ExperimentConfig& cfg, const fs::path& out)
{
    const AblationResult a = run_ablation(cfg);
    RunDir dir(out);
    dir.write("ablation.csv", [&](std::ostream& os) {
        os << "activation,nmse_in_sample,nmse_held_out\n";
        os << "tanh," << fmt17(a.nmse_tanh_in_sample) << ',' << fmt17(a.nmse_tanh) << '\n';
        os << "identity," << fmt17(a.nmse_identity_in_sample) << ',' << fmt17(a.nmse_identity) << '\n';
    });
    const json report = {{"command", "ablation"},
                         {"split", cfg.ablation.split},
                         {"nmse_tanh", a.nmse_tanh},
                         {"nmse_identity", a.nmse_identity},
                         {"nmse_tanh_in_sample", a.nmse_tanh_in_sample},
                         {"nmse_identity_in_sample", a.nmse_identity_in_sample},
                         {"ratio_identity_over_tanh", a.ratio}};
    dir.finish(Command::Ablation, cfg, report);
    return report;
}

json run_command(Command c, const ExperimentConfig& cfg, const fs::path& out)
{
    switch (c) {
    case Command::Generate: return cmd_generate(cfg, out);
    case Command::Exp1: return cmd_exp1(cfg, out);
    case Command::Exp2: return cmd_exp2(cfg, out);
    case Command::Lle: return cmd_lle(cfg, out);
    case Command::Ablation: return cmd_ablation(cfg, out);
    }
    throw Error(ErrorKind::ConfigError, "unknown command");
}

} // namespace slowres
