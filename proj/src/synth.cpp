#include "emx/synth.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>

namespace emx
{
namespace
{
using json = nlohmann::ordered_json;

void add_noise(std::vector<double> &values, double sigma, std::mt19937_64 &rng)
{
    if (sigma <= 0.0)
        return;
    std::normal_distribution<double> noise(0.0, sigma);
    for (double &v : values)
        v += noise(rng);
}

std::string numbered(const char *stem, std::size_t i)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%02zu.tsv", stem, i);
    return buf;
}

void tag(TraceFile &f, const char *series, std::uint64_t seed, std::uint64_t index)
{
    f.set("series", series);
    f.set("seed", std::to_string(seed));
    f.set("trace_index", std::to_string(index));
}
} // namespace

std::mt19937_64 trace_rng(std::uint64_t seed, std::uint64_t trace_index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trace_index), static_cast<std::uint32_t>(trace_index >> 32)};
    return std::mt19937_64(seq);
}

std::vector<SpectrumTrace> synth_eit_sweep(const ExperimentConfig &cfg, std::uint64_t seed)
{
    const double G = cfg.coupling(cfg.sweep.n_d);
    const double wm_hz = rad_to_hz(cfg.mech.omega_m);
    std::vector<SpectrumTrace> out;
    std::uint64_t index = kSweepIndex;
    auto make = [&](double delta_hz, double half_span, std::size_t points) {
        const auto grid = linear_grid(-half_span, half_span, points);
        SpectrumTrace t = reflection_trace(grid, cfg.cavity, cfg.mech, G, hz_to_rad(delta_hz), cfg.jitter);
        t.meta.drive_detuning_hz = delta_hz;
        t.meta.n_d = cfg.sweep.n_d;
        auto rng = trace_rng(seed, index++);
        add_noise(t.values, cfg.noise.reflection_sigma, rng);
        out.push_back(std::move(t));
    };
    for (double off : cfg.sweep.offsets_hz)
        make(wm_hz + off, cfg.sweep.span_hz, cfg.sweep.points);
    make(wm_hz, cfg.sweep.resonance_span_hz, cfg.sweep.resonance_points);
    return out;
}

SpectrumTrace synth_bare_cavity(const ExperimentConfig &cfg, std::uint64_t seed)
{
    const auto grid = linear_grid(-cfg.sweep.span_hz, cfg.sweep.span_hz, cfg.sweep.points);
    SpectrumTrace t = reflection_trace(grid, cfg.cavity, cfg.mech, 0.0, cfg.mech.omega_m);
    t.meta.n_d = 0.0;
    auto rng = trace_rng(seed, kBareIndex);
    add_noise(t.values, cfg.noise.reflection_sigma, rng);
    return t;
}

std::vector<SynthRingdown> synth_ringdowns(const ExperimentConfig &cfg, std::uint64_t seed)
{
    std::vector<SynthRingdown> out;
    for (std::size_t i = 0; i < cfg.ringdown.n_d.size(); ++i)
    {
        const double n_d = cfg.ringdown.n_d[i];
        const double G = cfg.coupling(n_d);
        const double gamma_m = total_damping(cfg.mech.gamma_i, backaction_rate(G, cfg.cavity.kappa_plus));
        const double a_cav = n_d > 0.0 ? cfg.ringdown.cavity_amplitude : 0.0;
        const double duration = cfg.ringdown.duration_decays / gamma_m;
        std::vector<double> times(cfg.ringdown.points);
        for (std::size_t k = 0; k < times.size(); ++k)
            times[k] = duration * static_cast<double>(k) / static_cast<double>(times.size() - 1);
        SynthRingdown r;
        r.n_d = n_d;
        r.gamma_m = gamma_m;
        r.trace = ringdown_trace(times, a_cav, cfg.cavity.kappa_plus, 1.0, gamma_m);
        auto rng = trace_rng(seed, kRingdownIndex + i);
        add_noise(r.trace.power, cfg.noise.ringdown_sigma, rng);
        out.push_back(std::move(r));
    }
    return out;
}

SynthHeating synth_heating(const ExperimentConfig &cfg, std::uint64_t seed)
{
    const auto &h = cfg.heating;
    SynthHeating out;
    HeatingParams &p = out.params;
    p.gamma_i = cfg.mech.gamma_i;
    p.gamma_em = backaction_rate(cfg.coupling(h.n_d), cfg.cavity.kappa_plus);
    p.gamma_p = hz_to_rad(h.gamma_p_hz);
    p.n_bath_m = cfg.mech.n_bath_m;
    p.delta_b = h.delta_b;
    p.gamma_s = hz_to_rad(h.gamma_s_hz);
    // Pump-bath occupancy chosen so the steady state equals n_hot.
    p.n_p = p.gamma_p > 0.0 ? (h.n_hot * p.gamma_total() - p.gamma_i * p.n_bath_m) / p.gamma_p : 0.0;
    p.validate();
    out.times.resize(h.points);
    out.n_m.resize(h.points);
    for (std::size_t k = 0; k < h.points; ++k)
    {
        out.times[k] = h.duration_s * static_cast<double>(k) / static_cast<double>(h.points - 1);
        out.n_m[k] = heating_closed_form(out.times[k], p);
    }
    auto rng = trace_rng(seed, kHeatingIndex);
    add_noise(out.n_m, cfg.noise.heating_sigma, rng);
    return out;
}

std::vector<SynthNpsd> synth_npsd(const ExperimentConfig &cfg, std::uint64_t seed)
{
    std::vector<SynthNpsd> out;
    const auto grid = linear_grid(-cfg.npsd.span_hz / 2.0, cfg.npsd.span_hz / 2.0, cfg.npsd.points);
    for (std::size_t i = 0; i < cfg.npsd.n_d.size(); ++i)
    {
        SynthNpsd s;
        s.n_d = cfg.npsd.n_d[i];
        const double G = cfg.coupling(s.n_d);
        s.n_m = occupancy_steady(cfg.cavity, cfg.mech, G);
        s.trace = npsd_trace(grid, cfg.cavity, cfg.mech, G, cfg.mech.omega_m);
        for (double &v : s.trace.values)
            v -= 1.0;
        s.trace.meta.n_d = s.n_d;
        s.trace.meta.gain_db = cfg.npsd.gain_db;
        s.trace.meta.extra["units"] = "quanta";
        s.trace.meta.extra["background"] = "subtracted";
        auto rng = trace_rng(seed, kNpsdIndex + i);
        add_noise(s.trace.values, cfg.noise.npsd_sigma, rng);
        out.push_back(std::move(s));
    }
    return out;
}

Dataset synthesize(const ExperimentConfig &cfg)
{
    Dataset ds;
    json manifest;
    manifest["seed"] = cfg.seed;
    json files = json::array();
    auto add = [&](std::string name, TraceFile f, json truth) {
        files.push_back({{"file", name}, {"series", *f.get("series")}, {"truth", std::move(truth)}});
        ds.traces.emplace_back(std::move(name), std::move(f));
    };

    const double G_sweep = cfg.coupling(cfg.sweep.n_d);
    const auto sweep = synth_eit_sweep(cfg, cfg.seed);
    for (std::size_t i = 0; i < sweep.size(); ++i)
    {
        TraceFile f = to_trace_file(sweep[i]);
        tag(f, "eit_sweep", cfg.seed, kSweepIndex + i);
        add(numbered("eit_sweep", i), std::move(f),
            {{"drive_detuning_hz", *sweep[i].meta.drive_detuning_hz}, {"G_hz", rad_to_hz(G_sweep)}});
    }

    {
        TraceFile f = to_trace_file(synth_bare_cavity(cfg, cfg.seed));
        tag(f, "bare_cavity", cfg.seed, kBareIndex);
        add("bare_cavity.tsv", std::move(f),
            {{"kappa_hz", rad_to_hz(cfg.cavity.kappa_plus)}, {"kappa_e_hz", rad_to_hz(cfg.cavity.kappa_e_plus)}});
    }

    const auto rds = synth_ringdowns(cfg, cfg.seed);
    for (std::size_t i = 0; i < rds.size(); ++i)
    {
        TraceFile f = to_trace_file(rds[i].trace);
        f.set("n_d", format_double(rds[i].n_d));
        tag(f, "ringdown", cfg.seed, kRingdownIndex + i);
        add(numbered("ringdown", i), std::move(f),
            {{"n_d", rds[i].n_d}, {"gamma_m_hz", rad_to_hz(rds[i].gamma_m)}});
    }

    {
        const SynthHeating h = synth_heating(cfg, cfg.seed);
        TraceFile f;
        f.set(kKindKey, kOccupancyKind);
        f.set("units", "quanta");
        f.set("x", "time_s");
        f.set("n_d", format_double(cfg.heating.n_d));
        tag(f, "heating", cfg.seed, kHeatingIndex);
        f.x = h.times;
        f.y = h.n_m;
        const auto &p = h.params;
        add("heating.tsv", std::move(f),
            {{"n_bath_m", p.n_bath_m},
             {"n_hot", p.n_hot()},
             {"gamma_hz", rad_to_hz(p.gamma_total())},
             {"gamma_s_hz", rad_to_hz(p.gamma_s)},
             {"n_p", p.n_p},
             {"delta_b", p.delta_b}});
    }

    const auto npsd = synth_npsd(cfg, cfg.seed);
    for (std::size_t i = 0; i < npsd.size(); ++i)
    {
        TraceFile f = to_trace_file(npsd[i].trace);
        tag(f, "npsd", cfg.seed, kNpsdIndex + i);
        add(numbered("npsd", i), std::move(f), {{"n_d", npsd[i].n_d}, {"n_m", npsd[i].n_m}});
    }

    manifest["files"] = std::move(files);
    manifest["config"] = json::parse(config_to_json(cfg));
    ds.manifest = manifest.dump(2) + "\n";
    return ds;
}

std::optional<RingdownPrior> ringdown_prior(std::span<const RingdownPoint> points, double kappa_plus,
                                            double n_d_target)
{
    std::vector<DampingPoint> damping;
    for (const auto &p : points)
    {
        if (p.fit.convergence == Convergence::Degenerate || !p.fit.has("gamma_m_hz"))
            continue;
        const double s = hz_to_rad(p.fit.sigma("gamma_m_hz"));
        damping.push_back({p.n_d, hz_to_rad(p.fit.value("gamma_m_hz")), s > 0.0 ? 1.0 / (s * s) : 1.0});
    }
    if (damping.size() < 3)
        return std::nullopt;
    const FitReport slope = fit_g0_slope(damping, kappa_plus);
    if (slope.convergence == Convergence::Degenerate)
        return std::nullopt;
    RingdownPrior prior;
    const double root = std::sqrt(n_d_target);
    prior.G_hz = slope.value("g0_pm_hz") * root;
    prior.G_sigma_hz = slope.sigma("g0_pm_hz") * root;
    prior.gamma_i_hz = slope.value("gamma_i_intercept_hz");
    prior.gamma_i_sigma_hz = slope.sigma("gamma_i_intercept_hz");
    if (!(prior.G_hz > 0.0) || !(prior.gamma_i_hz > 0.0))
        return std::nullopt;
    return prior;
}

} // namespace emx
