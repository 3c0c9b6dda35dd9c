#include "emx/commands.hpp"

#include "emx/designer.hpp"
#include "emx/io.hpp"
#include "emx/synth.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace emx
{
namespace
{
namespace fs = std::filesystem;

std::string stem_of(const std::string &file)
{
    const auto dot = file.rfind(".tsv");
    return dot == std::string::npos ? file : file.substr(0, dot);
}

struct LoadedTrace
{
    std::string name;
    TraceFile file;
};

using SeriesMap = std::map<std::string, std::vector<LoadedTrace>>;

std::string series_of(const TraceFile &f)
{
    if (auto s = f.get("series"))
        return *s;
    const auto kind = f.get(kKindKey).value_or("");
    if (kind == kRingdownKind)
        return "ringdown";
    if (kind == kOccupancyKind)
        return "heating";
    if (kind == "NPSD")
        return "npsd";
    return "unlabelled";
}

SeriesMap load_dataset(const fs::path &dir)
{
    if (!fs::is_directory(dir))
        throw ConfigError(dir.string(), "dataset directory does not exist");
    std::vector<fs::path> files;
    for (const auto &entry : fs::directory_iterator(dir))
    {
        const auto name = entry.path().filename().string();
        if (entry.is_regular_file() && name.ends_with(".tsv") && !name.ends_with(".model.tsv"))
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    SeriesMap out;
    for (const auto &p : files)
    {
        TraceFile f = read_trace_file(p);
        out[series_of(f)].push_back({p.filename().string(), std::move(f)});
    }
    return out;
}

void print_report(std::ostream &log, const std::string &title, const FitReport &r)
{
    log << title << ": " << to_string(r.convergence);
    for (const auto &[name, est] : r.params)
        log << "  " << name << "=" << format_double(est.value) << "+-" << format_double(est.sigma);
    log << "\n";
    for (const auto &w : r.warnings)
        log << "  warning: " << w << "\n";
}

TraceFile overlay(const TraceFile &source, const std::string &source_name, std::vector<double> x,
                  std::vector<double> y)
{
    TraceFile f;
    for (const char *key : {kKindKey, "units", "x"})
        if (auto v = source.get(key))
            f.set(key, *v);
    f.set("model_of", source_name);
    f.x = std::move(x);
    f.y = std::move(y);
    return f;
}

double require_header_number(const LoadedTrace &t, const char *key)
{
    const auto v = t.file.get(key);
    if (!v)
        throw ConfigError(t.name, std::string("missing header key ") + key);
    return parse_double(*v);
}

std::vector<RingdownPoint> fit_ringdowns(const std::vector<LoadedTrace> &traces,
                                         std::vector<std::pair<std::string, FitReport>> &reports,
                                         std::vector<std::pair<std::string, TraceFile>> &overlays)
{
    std::vector<RingdownPoint> points;
    for (const auto &t : traces)
    {
        const RingdownTrace rd = ringdown_from_file(t.file);
        FitReport r = fit_ringdown(rd);
        if (r.has("gamma_m_hz"))
        {
            const double gamma = hz_to_rad(r.value("gamma_m_hz"));
            const double a = r.value("amplitude_mech");
            std::vector<double> y;
            for (double time : rd.times)
                y.push_back(a * std::exp(-gamma * time));
            overlays.emplace_back(stem_of(t.name) + ".model.tsv", overlay(t.file, t.name, rd.times, std::move(y)));
        }
        points.push_back({t.file.get("n_d") ? require_header_number(t, "n_d") : 0.0, r});
        reports.emplace_back(stem_of(t.name), std::move(r));
    }
    return points;
}

void probe_writable(const fs::path &dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw ConfigError(dir.string(), "cannot create output directory: " + ec.message());
    const fs::path probe = dir / ".emx_write_probe";
    {
        std::ofstream out(probe);
        if (!out)
            throw ConfigError(dir.string(), "output directory is not writable");
    }
    fs::remove(probe, ec);
}
} // namespace

GridSpec parse_grid(const std::string &text)
{
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        parts.push_back(item);
    if (parts.size() != 3)
        throw ConfigError("--grid", "expected start,stop,points");
    GridSpec g;
    try
    {
        g.start_hz = parse_double(parts[0]);
        g.stop_hz = parse_double(parts[1]);
        const double pts = parse_double(parts[2]);
        if (pts < 2 || pts != std::floor(pts))
            throw ConfigError("--grid", "points must be an integer >= 2");
        g.points = static_cast<std::size_t>(pts);
    }
    catch (const FormatError &e)
    {
        throw ConfigError("--grid", e.what());
    }
    if (!(g.stop_hz > g.start_hz))
        throw ConfigError("--grid", "stop must exceed start");
    return g;
}

fs::path resolve_output_dir(const std::optional<std::string> &flag, const ExperimentConfig &cfg)
{
    fs::path dir;
    if (flag)
        dir = *flag;
    else if (cfg.output_dir)
        dir = *cfg.output_dir;
    else if (const char *env = std::getenv("EMX_OUT_DIR"); env && *env)
        dir = env;
    else
        dir = "emx_out";
    probe_writable(dir);
    return dir;
}

int cmd_spectrum(const ExperimentConfig &cfg, const std::string &subkind, const std::optional<GridSpec> &grid,
                 const fs::path &out_dir, std::ostream &log)
{
    if (subkind != "eit" && subkind != "inverse" && subkind != "npsd")
        throw ConfigError("spectrum", "kind must be eit, inverse or npsd");
    if (cfg.drives.empty())
        throw ConfigError("drives", "at least one drive is required");
    GridSpec g = grid.value_or(subkind == "npsd" ? GridSpec{-100e3, 100e3, 4001} : GridSpec{-600e3, 600e3, 2401});
    const auto freqs = linear_grid(g.start_hz, g.stop_hz, g.points);

    for (std::size_t i = 0; i < cfg.drives.size(); ++i)
    {
        const auto &drive = cfg.drives[i];
        const double n_d = cfg.photons(drive);
        const double G = cfg.coupling(n_d);
        const double delta = hz_to_rad(drive.detuning_hz);
        SpectrumTrace t;
        if (subkind == "npsd")
            t = npsd_trace(freqs, cfg.cavity, cfg.mech, G, delta);
        else
        {
            t = reflection_trace(freqs, cfg.cavity, cfg.mech, G, delta, cfg.jitter);
            if (subkind == "inverse")
                t = inverse_response(t);
        }
        t.meta.drive_detuning_hz = drive.detuning_hz;
        t.meta.n_d = n_d;
        TraceFile f = to_trace_file(t);
        f.set("G_hz", format_double(rad_to_hz(G)));
        char name[64];
        std::snprintf(name, sizeof name, "spectrum_%s_%02zu.tsv", subkind.c_str(), i);
        write_trace_file(out_dir / name, f);
        log << "wrote " << (out_dir / name).string() << " (n_d=" << format_double(n_d)
            << ", G_hz=" << format_double(rad_to_hz(G)) << ")\n";
    }
    return kExitOk;
}

int cmd_synth(const ExperimentConfig &cfg, const fs::path &out_dir, std::ostream &log)
{
    probe_writable(out_dir);
    const Dataset ds = synthesize(cfg);
    for (const auto &[name, file] : ds.traces)
        write_trace_file(out_dir / name, file);
    write_text_atomic(out_dir / "manifest.json", ds.manifest);
    log << "wrote " << ds.traces.size() << " traces and manifest.json to " << out_dir.string() << "\n";
    return kExitOk;
}

int cmd_fit(const ExperimentConfig &cfg, const std::string &pipeline, const fs::path &data_dir,
            const fs::path &out_dir, std::ostream &log)
{
    static const std::map<std::string, std::vector<std::string>> needs = {
        {"lorentzian", {"bare_cavity"}}, {"eit", {"eit_sweep"}}, {"ringdown", {"ringdown"}},
        {"g0slope", {"ringdown"}},       {"occupancy", {"npsd"}}, {"heating", {"heating"}},
    };
    const auto need = needs.find(pipeline);
    if (need == needs.end())
        throw ConfigError("fit", "unknown pipeline '" + pipeline + "'");

    const SeriesMap data = load_dataset(data_dir);
    std::vector<std::string> missing;
    for (const auto &series : need->second)
        if (!data.count(series))
            missing.push_back(series);
    if (!missing.empty())
    {
        log << "missing inputs in " << data_dir.string() << ":";
        for (const auto &m : missing)
            log << " " << m;
        log << "\n";
        return kExitInputError;
    }

    std::vector<std::pair<std::string, FitReport>> reports;
    std::vector<std::pair<std::string, TraceFile>> overlays;

    if (pipeline == "lorentzian")
    {
        for (const auto &t : data.at("bare_cavity"))
        {
            const SpectrumTrace s = spectrum_from_file(t.file);
            FitReport r = fit_lorentzian(s);
            std::vector<double> y;
            for (double f : s.freqs_hz)
                y.push_back(lorentzian_reflection(f, r.value("centre_hz"), r.value("kappa_hz"), r.value("kappa_e_hz")));
            overlays.emplace_back(stem_of(t.name) + ".model.tsv", overlay(t.file, t.name, s.freqs_hz, std::move(y)));
            reports.emplace_back(stem_of(t.name), std::move(r));
        }
    }
    else if (pipeline == "eit")
    {
        std::vector<SpectrumTrace> traces;
        for (const auto &t : data.at("eit_sweep"))
            traces.push_back(spectrum_from_file(t.file));
        if (traces.size() < 4)
        {
            log << "missing inputs: eit pipeline needs three off-resonance traces and one at two-photon resonance\n";
            return kExitInputError;
        }
        std::optional<RingdownPrior> prior;
        if (data.count("ringdown"))
        {
            std::vector<std::pair<std::string, FitReport>> rd_reports;
            std::vector<std::pair<std::string, TraceFile>> rd_overlays;
            const auto points = fit_ringdowns(data.at("ringdown"), rd_reports, rd_overlays);
            const double n_d = traces.back().meta.n_d.value_or(cfg.sweep.n_d);
            prior = ringdown_prior(points, cfg.cavity.kappa_plus, n_d);
        }
        if (!prior)
            log << "no usable ringdown prior; seeding from the inverse response\n";
        EitPipelineOptions opts;
        opts.omega_m_hz = rad_to_hz(cfg.mech.omega_m);
        opts.jitter_shape = cfg.jitter.shape;
        FitReport r = fit_eit_pipeline(traces, prior, opts);

        if (r.has("G_hz") && r.has("gamma_i_hz"))
        {
            std::size_t res = 0;
            for (std::size_t i = 1; i < traces.size(); ++i)
                if (std::abs(*traces[i].meta.drive_detuning_hz - opts.omega_m_hz) <
                    std::abs(*traces[res].meta.drive_detuning_hz - opts.omega_m_hz))
                    res = i;
            EitModelParams p;
            p.centre_hz = r.value("centre_hz");
            p.kappa_hz = r.value("kappa_plus_hz");
            p.kappa_e_hz = r.value("kappa_e_plus_hz");
            p.G_hz = r.value("G_hz");
            p.gamma_i_hz = r.value("gamma_i_hz");
            p.mech_offset_hz =
                opts.omega_m_hz - *traces[res].meta.drive_detuning_hz - p.centre_hz + r.value("mech_offset_hz");
            p.jitter = {opts.jitter_shape, r.value("jitter_fwhm_hz")};
            const auto &src = data.at("eit_sweep")[res];
            overlays.emplace_back(stem_of(src.name) + ".model.tsv",
                                  overlay(src.file, src.name, traces[res].freqs_hz,
                                          eit_model_magnitude(traces[res].freqs_hz, p)));
        }
        reports.emplace_back("eit", std::move(r));
    }
    else if (pipeline == "ringdown")
    {
        fit_ringdowns(data.at("ringdown"), reports, overlays);
    }
    else if (pipeline == "g0slope")
    {
        const auto points = fit_ringdowns(data.at("ringdown"), reports, overlays);
        std::vector<DampingPoint> damping;
        for (const auto &p : points)
        {
            if (p.fit.convergence == Convergence::Degenerate)
                continue;
            const double s = hz_to_rad(p.fit.sigma("gamma_m_hz"));
            damping.push_back({p.n_d, hz_to_rad(p.fit.value("gamma_m_hz")), s > 0.0 ? 1.0 / (s * s) : 1.0});
        }
        if (damping.size() < 3)
        {
            log << "missing inputs: need at least three usable ringdowns at distinct n_d\n";
            return kExitInputError;
        }
        FitReport r = fit_g0_slope(damping, cfg.cavity.kappa_plus);
        TraceFile line;
        line.set(kKindKey, "DampingRate");
        line.set("units", "Hz");
        line.set("x", "n_d");
        std::sort(damping.begin(), damping.end(), [](const auto &a, const auto &b) { return a.n_d < b.n_d; });
        for (const auto &d : damping)
        {
            line.x.push_back(d.n_d);
            line.y.push_back(r.value("gamma_i_intercept_hz") + r.value("slope_hz") * d.n_d);
        }
        overlays.emplace_back("g0slope.model.tsv", std::move(line));
        reports.emplace_back("g0slope", std::move(r));
    }
    else if (pipeline == "occupancy")
    {
        for (const auto &t : data.at("npsd"))
        {
            const SpectrumTrace s = spectrum_from_file(t.file);
            const double n_d = require_header_number(t, "n_d");
            const double G = cfg.coupling(n_d);
            const double gamma_em = backaction_rate(G, cfg.cavity.kappa_plus);
            const auto cal = calibrate_occupancy(s, s.meta.gain_db.value_or(0.0), gamma_em, cfg.cavity);
            FitReport r;
            r.set("n_m", cal.n_m, 0.0, "");
            r.set("area_hz", cal.area_hz, 0.0, "Hz");
            r.set("n_m_steady_state", occupancy_steady(cfg.cavity, cfg.mech, G), 0.0, "");
            r.warnings = cal.warnings;
            r.stage_log.push_back({"npsd_area", {{"n_d", n_d}, {"gamma_em_hz", rad_to_hz(gamma_em)}},
                                   {{"n_m", cal.n_m}}, ""});
            reports.emplace_back(stem_of(t.name), std::move(r));
        }
    }
    else if (pipeline == "heating")
    {
        for (const auto &t : data.at("heating"))
        {
            FitReport r = fit_heating(t.file.x, t.file.y);
            std::vector<double> y;
            for (double time : t.file.x)
                y.push_back(heating_shape(time, r.value("n_bath_m"), r.value("n_hot"),
                                          hz_to_rad(r.value("gamma_hz")), r.value("n_delta"),
                                          hz_to_rad(r.value("gamma_s_hz"))));
            overlays.emplace_back(stem_of(t.name) + ".model.tsv", overlay(t.file, t.name, t.file.x, std::move(y)));
            reports.emplace_back(stem_of(t.name), std::move(r));
        }
    }

    std::string text;
    bool degenerate = false;
    for (const auto &[title, r] : reports)
    {
        if (!text.empty())
            text += "\n";
        text += serialize_report(title, r);
        print_report(log, title, r);
        degenerate = degenerate || r.convergence == Convergence::Degenerate;
    }
    const fs::path report_path = out_dir / ("fit_" + pipeline + ".txt");
    write_text_atomic(report_path, text);
    for (const auto &[name, file] : overlays)
        write_trace_file(out_dir / name, file);
    log << "wrote " << report_path.string() << "\n";
    return degenerate ? kExitDegenerate : kExitOk;
}

int cmd_design(const ExperimentConfig &cfg, const fs::path &out_dir, std::ostream &log)
{
    const auto &d = cfg.design;
    const double L = wheeler_inductance(d.coil, d.coefficients);
    const double c_stray = stray_capacitance_from_srf(L, hz_to_rad(d.srf_hz));
    const CapacitorBudget budget{d.c_motional_ff * 1e-15, c_stray};
    const double omega_r0 = lc_frequency(L, budget.total());
    const double eta = participation_ratio(budget);

    std::string text = "[design]\n";
    auto line = [&](const std::string &key, double v) { text += key + ": " + format_double(v) + "\n"; };
    line("inductance_nh", L * 1e9);
    line("inner_dim_nm", d.coil.inner_dim() * 1e9);
    line("stray_capacitance_ff", c_stray * 1e15);
    line("motional_capacitance_ff", budget.c_motional * 1e15);
    line("total_capacitance_ff", budget.total() * 1e15);
    line("omega_r0_hz", rad_to_hz(omega_r0));
    line("participation_ratio", eta);
    if (d.m_eff_kg)
    {
        const double x_zpf = zero_point_motion(*d.m_eff_kg, cfg.mech.omega_m);
        line("x_zpf_m", x_zpf);
        if (d.dc_du_f_per_m)
            line("g0_hz", rad_to_hz(g0_from_circuit(eta, x_zpf, omega_r0, budget.c_motional, *d.dc_du_f_per_m)));
    }
    write_text_atomic(out_dir / "design.txt", text);
    log << text;
    return kExitOk;
}

} // namespace emx
