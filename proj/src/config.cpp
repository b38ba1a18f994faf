#include "slowres/config.hpp"

#include "slowres/error.hpp"
#include "slowres/random.hpp"

#include <fstream>
#include <set>

namespace slowres {

using nlohmann::json;

std::string_view to_string(Command c)
{
    switch (c) {
    case Command::Generate: return "generate";
    case Command::Exp1: return "exp1";
    case Command::Exp2: return "exp2";
    case Command::Lle: return "lle";
    case Command::Ablation: return "ablation";
    }
    return "unknown";
}

namespace {

[[noreturn]] void config_fail(const std::string& what) { throw Error(ErrorKind::ConfigError, what); }

ExperimentConfig exp1_lorenz()
{
    ExperimentConfig c;
    c.recipe = "exp1-lorenz";
    c.system = Lorenz{};
    c.schedule = Triangle{64.0, 100.0, 500.0};
    c.integration = {};
    return c;
}

// The triangle range is ours (no published values); 7000 time units is
// 10000 steps at dt 0.7, the same period in steps as the Lorenz recipe.
ExperimentConfig exp1_rossler()
{
    ExperimentConfig c = exp1_lorenz();
    c.recipe = "exp1-rossler";
    c.system = Rossler{};
    c.schedule = Triangle{0.1, 0.4, 7000.0};
    c.integration.dt_obs = 0.7;
    c.integration.substeps = 14;
    c.pipeline.slow.chi_in = 15.0;
    c.pipeline.slow.chi_b = 150.0;
    return c;
}

// Ramp chosen so the source system is chaotic at the first probe (lambda 25.3
// at n = 5600), loses its attractor at lambda 24.06 (n ~ 6390) and has settled
// on a fixed point by n ~ 7640.
ExperimentConfig exp2_lorenz()
{
    ExperimentConfig c;
    c.recipe = "exp2";
    c.system = Lorenz{};
    c.schedule = LinearRamp{34.0, 20.0, 0.0, 450.0};
    c.integration.n_samples = 9001;
    c.pipeline.beta_fast = 1e-4;
    c.pipeline.beta_sdp = 1e-8;
    c.pipeline.standardize_h = true;
    c.rollout.end_n = 9000;
    return c;
}

ExperimentConfig lle_sweep()
{
    ExperimentConfig c = exp2_lorenz();
    c.recipe = "lle-sweep";
    c.lle.probes = {5600, 6000, 6500, 7000, 7500, 8000};
    return c;
}

// --- json <-> structs ------------------------------------------------------

/// Reads members of one object and rejects any it was not asked about.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) config_fail(path_ + " must be an object");
    }

    template <class T>
    void get(const char* key, T& out)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception&) {
            config_fail(path_ + "." + key + " has the wrong type");
        }
    }

    const json* child(const char* key)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    std::string sub(const char* key) const { return path_ + "." + key; }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.contains(it.key())) config_fail("unknown key " + path_ + "." + it.key());
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

json reservoir_json(const ReservoirSpec& s)
{
    json r;
    if (const auto* sp = std::get_if<SparseUniform>(&s.recurrent_init))
        r = {{"kind", "sparse_uniform"}, {"density", sp->density}};
    else
        r = {{"kind", "dense_gaussian"}};
    return {{"n_units", s.n_units},     {"leak", s.leak},       {"rho", s.rho_target},
            {"recurrent", r},           {"chi_in", s.chi_in},   {"chi_param", s.chi_param},
            {"chi_b", s.chi_b},         {"activation", s.activation == Activation::Tanh ? "tanh" : "identity"}};
}

void read_reservoir(const json& j, const std::string& path, ReservoirSpec& s)
{
    Reader r(j, path);
    r.get("n_units", s.n_units);
    r.get("leak", s.leak);
    r.get("rho", s.rho_target);
    r.get("chi_in", s.chi_in);
    r.get("chi_param", s.chi_param);
    r.get("chi_b", s.chi_b);
    std::string act = s.activation == Activation::Tanh ? "tanh" : "identity";
    r.get("activation", act);
    if (act == "tanh")
        s.activation = Activation::Tanh;
    else if (act == "identity")
        s.activation = Activation::Identity;
    else
        config_fail(path + ".activation must be \"tanh\" or \"identity\"");
    if (const json* rec = r.child("recurrent")) {
        Reader rr(*rec, r.sub("recurrent"));
        std::string kind;
        rr.get("kind", kind);
        if (kind == "dense_gaussian") {
            s.recurrent_init = DenseGaussian{};
        } else if (kind == "sparse_uniform") {
            SparseUniform su;
            if (const auto* old = std::get_if<SparseUniform>(&s.recurrent_init)) su = *old;
            rr.get("density", su.density);
            s.recurrent_init = su;
        } else {
            config_fail(r.sub("recurrent") + ".kind must be \"dense_gaussian\" or \"sparse_uniform\"");
        }
        rr.finish();
    }
    r.finish();
}

json system_json(const SystemSpec& s)
{
    if (const auto* l = std::get_if<Lorenz>(&s)) return {{"kind", "lorenz"}, {"a", l->a}, {"b", l->b}};
    const auto& r = std::get<Rossler>(s);
    return {{"kind", "rossler"}, {"a", r.a}, {"c", r.c}};
}

// The kind may change under an override; fields then start from that kind's defaults.
SystemSpec read_system(const json& j, const SystemSpec& base)
{
    Reader r(j, "system");
    std::string kind = std::holds_alternative<Lorenz>(base) ? "lorenz" : "rossler";
    r.get("kind", kind);
    SystemSpec out;
    if (kind == "lorenz") {
        Lorenz l = std::holds_alternative<Lorenz>(base) ? std::get<Lorenz>(base) : Lorenz{};
        r.get("a", l.a);
        r.get("b", l.b);
        out = l;
    } else if (kind == "rossler") {
        Rossler ro = std::holds_alternative<Rossler>(base) ? std::get<Rossler>(base) : Rossler{};
        r.get("a", ro.a);
        r.get("c", ro.c);
        out = ro;
    } else {
        config_fail("system.kind must be \"lorenz\" or \"rossler\"");
    }
    r.finish();
    return out;
}

json schedule_json(const ParamSchedule& s)
{
    return std::visit(
        [](const auto& v) -> json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Constant>)
                return {{"kind", "constant"}, {"value", v.value}};
            else if constexpr (std::is_same_v<T, Triangle>)
                return {{"kind", "triangle"}, {"lo", v.lo}, {"hi", v.hi}, {"period", v.period}};
            else
                return {{"kind", "ramp"}, {"from", v.from}, {"to", v.to}, {"t_start", v.t_start}, {"t_end", v.t_end}};
        },
        s);
}

ParamSchedule read_schedule(const json& j, const ParamSchedule& base)
{
    Reader r(j, "schedule");
    std::string kind = std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Constant>) return "constant";
            else if constexpr (std::is_same_v<T, Triangle>) return "triangle";
            else return "ramp";
        },
        base);
    r.get("kind", kind);
    ParamSchedule out;
    if (kind == "constant") {
        Constant c = std::holds_alternative<Constant>(base) ? std::get<Constant>(base) : Constant{};
        r.get("value", c.value);
        out = c;
    } else if (kind == "triangle") {
        Triangle t = std::holds_alternative<Triangle>(base) ? std::get<Triangle>(base) : Triangle{};
        r.get("lo", t.lo);
        r.get("hi", t.hi);
        r.get("period", t.period);
        out = t;
    } else if (kind == "ramp") {
        LinearRamp l = std::holds_alternative<LinearRamp>(base) ? std::get<LinearRamp>(base) : LinearRamp{};
        r.get("from", l.from);
        r.get("to", l.to);
        r.get("t_start", l.t_start);
        r.get("t_end", l.t_end);
        out = l;
    } else {
        config_fail("schedule.kind must be \"constant\", \"triangle\" or \"ramp\"");
    }
    r.finish();
    return out;
}

void read_body(const json& j, ExperimentConfig& c)
{
    Reader r(j, "config");
    r.get("schema_version", c.schema_version);
    if (c.schema_version != kSchemaVersion)
        config_fail("unsupported schema_version " + std::to_string(c.schema_version));
    r.get("recipe", c.recipe);
    r.get("seed", c.seed);
    if (const json* s = r.child("system")) c.system = read_system(*s, c.system);
    if (const json* s = r.child("schedule")) c.schedule = read_schedule(*s, c.schedule);
    if (const json* s = r.child("integration")) {
        Reader q(*s, "integration");
        q.get("dt_obs", c.integration.dt_obs);
        q.get("substeps", c.integration.substeps);
        q.get("spinup", c.integration.spinup);
        q.get("x0", c.integration.x0);
        q.get("n_samples", c.integration.n_samples);
        q.finish();
    }
    if (const json* s = r.child("reservoirs")) {
        Reader q(*s, "reservoirs");
        if (const json* v = q.child("slow")) read_reservoir(*v, "reservoirs.slow", c.pipeline.slow);
        if (const json* v = q.child("fast")) read_reservoir(*v, "reservoirs.fast", c.pipeline.fast);
        if (const json* v = q.child("sdp")) read_reservoir(*v, "reservoirs.sdp", c.pipeline.sdp);
        q.finish();
    }
    if (const json* s = r.child("slowfeat")) {
        Reader q(*s, "slowfeat");
        q.get("window", c.pipeline.window);
        q.get("fraction", c.pipeline.fraction);
        q.get("saturation_tol", c.pipeline.saturation_tol);
        q.get("tau_f", c.pipeline.tau_f);
        q.get("standardize_h", c.pipeline.standardize_h);
        q.finish();
    }
    if (const json* s = r.child("training")) {
        Reader q(*s, "training");
        q.get("beta_fast", c.pipeline.beta_fast);
        q.get("beta_sdp", c.pipeline.beta_sdp);
        q.get("washout_n", c.pipeline.washout_n);
        q.get("switchover_n", c.pipeline.switchover_n);
        q.finish();
    }
    if (const json* s = r.child("exp1")) {
        Reader q(*s, "exp1");
        q.get("transient", c.exp1.transient);
        q.finish();
    }
    if (const json* s = r.child("rollout")) {
        Reader q(*s, "rollout");
        q.get("end_n", c.rollout.end_n);
        q.get("fresh_h", c.rollout.fresh_h);
        q.get("collapse_width", c.rollout.collapse_width);
        q.get("collapse_fraction", c.rollout.collapse_fraction);
        q.finish();
    }
    if (const json* s = r.child("lle")) {
        Reader q(*s, "lle");
        q.get("probes", c.lle.probes);
        q.get("transient_steps", c.lle.transient_steps);
        q.get("measured_steps", c.lle.measured_steps);
        q.get("renorm_interval", c.lle.renorm_interval);
        q.get("paper_exact", c.lle.paper_exact);
        q.get("source_t_total", c.lle.source_t_total);
        q.finish();
    }
    if (const json* s = r.child("embed")) {
        Reader q(*s, "embed");
        q.get("dim", c.embed.dim);
        q.get("lag", c.embed.lag);
        q.get("steps", c.embed.steps);
        q.finish();
    }
    if (const json* s = r.child("ablation")) {
        Reader q(*s, "ablation");
        q.get("beta", c.ablation.beta);
        q.get("split", c.ablation.split);
        q.finish();
    }
    r.finish();
}

} // namespace

std::vector<std::string> recipe_names() { return {"exp1-lorenz", "exp1-rossler", "exp2", "lle-sweep"}; }

ExperimentConfig recipe(const std::string& name)
{
    ExperimentConfig c;
    if (name == "exp1-lorenz")
        c = exp1_lorenz();
    else if (name == "exp1-rossler")
        c = exp1_rossler();
    else if (name == "exp2")
        c = exp2_lorenz();
    else if (name == "lle-sweep")
        c = lle_sweep();
    else
        config_fail("unknown recipe \"" + name + "\"");
    apply_seed(c, c.seed);
    return c;
}

std::string default_recipe(Command c)
{
    switch (c) {
    case Command::Exp2: return "exp2";
    case Command::Lle: return "lle-sweep";
    default: return "exp1-lorenz";
    }
}

json to_json(const ExperimentConfig& c)
{
    return {
        {"schema_version", c.schema_version},
        {"recipe", c.recipe},
        {"seed", c.seed},
        {"system", system_json(c.system)},
        {"schedule", schedule_json(c.schedule)},
        {"integration",
         {{"dt_obs", c.integration.dt_obs},
          {"substeps", c.integration.substeps},
          {"spinup", c.integration.spinup},
          {"x0", c.integration.x0},
          {"n_samples", c.integration.n_samples}}},
        {"reservoirs",
         {{"slow", reservoir_json(c.pipeline.slow)},
          {"fast", reservoir_json(c.pipeline.fast)},
          {"sdp", reservoir_json(c.pipeline.sdp)}}},
        {"slowfeat",
         {{"window", c.pipeline.window},
          {"fraction", c.pipeline.fraction},
          {"saturation_tol", c.pipeline.saturation_tol},
          {"tau_f", c.pipeline.tau_f},
          {"standardize_h", c.pipeline.standardize_h}}},
        {"training",
         {{"beta_fast", c.pipeline.beta_fast},
          {"beta_sdp", c.pipeline.beta_sdp},
          {"washout_n", c.pipeline.washout_n},
          {"switchover_n", c.pipeline.switchover_n}}},
        {"exp1", {{"transient", c.exp1.transient}}},
        {"rollout",
         {{"end_n", c.rollout.end_n},
          {"fresh_h", c.rollout.fresh_h},
          {"collapse_width", c.rollout.collapse_width},
          {"collapse_fraction", c.rollout.collapse_fraction}}},
        {"lle",
         {{"probes", c.lle.probes},
          {"transient_steps", c.lle.transient_steps},
          {"measured_steps", c.lle.measured_steps},
          {"renorm_interval", c.lle.renorm_interval},
          {"paper_exact", c.lle.paper_exact},
          {"source_t_total", c.lle.source_t_total}}},
        {"embed", {{"dim", c.embed.dim}, {"lag", c.embed.lag}, {"steps", c.embed.steps}}},
        {"ablation", {{"beta", c.ablation.beta}, {"split", c.ablation.split}}},
    };
}

ExperimentConfig config_from_json(const json& input, Command cmd)
{
    const json& j = input.is_object() && input.contains("manifest_version") ? input.at("config") : input;
    if (!j.is_object()) config_fail("config must be a JSON object");
    std::string name = default_recipe(cmd);
    if (auto it = j.find("recipe"); it != j.end()) {
        if (!it->is_string()) config_fail("config.recipe must be a string");
        name = it->get<std::string>();
    }
    ExperimentConfig c = recipe(name);
    read_body(j, c);
    apply_seed(c, c.seed);
    validate(c, cmd);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, Command c)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        config_fail("cannot parse " + path.string() + ": " + e.what());
    }
    return config_from_json(j, c);
}

void apply_seed(ExperimentConfig& cfg, std::uint64_t seed)
{
    cfg.seed = seed;
    cfg.pipeline.slow.seed = derive_seed(seed, 1);
    cfg.pipeline.fast.seed = derive_seed(seed, 2);
    cfg.pipeline.sdp.seed = derive_seed(seed, 3);
}

void validate(const ExperimentConfig& c, Command cmd)
{
    validate(c.schedule);
    const auto& in = c.integration;
    if (!(in.dt_obs > 0.0) || !std::isfinite(in.dt_obs)) config_fail("integration.dt_obs must be positive");
    if (in.substeps < 1) config_fail("integration.substeps must be >= 1");
    if (!(in.spinup >= 0.0)) config_fail("integration.spinup must be >= 0");
    if (in.n_samples == 0) config_fail("integration.n_samples must be >= 1");
    for (double v : in.x0)
        if (!std::isfinite(v)) config_fail("integration.x0 must be finite");

    const std::size_t n = in.n_samples;
    switch (cmd) {
    case Command::Generate:
        break;
    case Command::Exp1:
    case Command::Ablation:
        validate(c.pipeline.slow);
        if (c.pipeline.window == 0) config_fail("slowfeat.window must be >= 1");
        if (!(c.pipeline.fraction > 0.0 && c.pipeline.fraction <= 1.0)) config_fail("slowfeat.fraction must lie in (0, 1]");
        if (!(c.exp1.transient < n)) config_fail("exp1.transient must be < n_samples");
        if (n - c.exp1.transient < c.pipeline.window) config_fail("post-transient range shorter than slowfeat.window");
        if (cmd == Command::Ablation) {
            if (!(c.ablation.beta >= 0.0)) config_fail("ablation.beta must be >= 0");
            if (!(c.ablation.split > c.exp1.transient && c.ablation.split < n))
                config_fail("ablation.split must lie in (exp1.transient, n_samples)");
        }
        break;
    case Command::Exp2:
    case Command::Lle: {
        validate(c.pipeline);
        const auto& r = c.rollout;
        if (c.pipeline.switchover_n > n) config_fail("training.switchover_n exceeds n_samples");
        if (!(r.end_n > c.pipeline.switchover_n)) config_fail("rollout.end_n must exceed training.switchover_n");
        if (r.end_n >= n) config_fail("rollout.end_n must be < n_samples (ground truth is compared up to end_n)");
        if (r.collapse_width == 0) config_fail("rollout.collapse_width must be >= 1");
        if (!(r.collapse_fraction > 0.0)) config_fail("rollout.collapse_fraction must be positive");
        for (auto p : c.lle.probes)
            if (p <= c.pipeline.switchover_n || p > r.end_n)
                config_fail("lle.probes must lie in (switchover_n, end_n]");
        if (!(c.lle.measured_steps > 0)) config_fail("lle.measured_steps must be >= 1");
        if (c.lle.renorm_interval == 0) config_fail("lle.renorm_interval must be >= 1");
        if (!(c.lle.source_t_total >= 0.0)) config_fail("lle.source_t_total must be >= 0");
        if (c.embed.dim == 0 || c.embed.lag == 0) config_fail("embed.dim and embed.lag must be >= 1");
        if (c.embed.steps <= (c.embed.dim - 1) * c.embed.lag) config_fail("embed.steps too short for the embedding");
        break;
    }
    }
}

GenerateOptions generate_options(const ExperimentConfig& cfg)
{
    GenerateOptions g;
    g.x0 = cfg.integration.x0;
    g.spinup = cfg.integration.spinup;
    g.dt_obs = cfg.integration.dt_obs;
    g.substeps = cfg.integration.substeps;
    g.n_samples = cfg.integration.n_samples;
    return g;
}

} // namespace slowres
