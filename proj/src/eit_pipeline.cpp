#include "emx/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace emx
{
namespace
{

void require(bool cond, const char *what)
{
    if (!cond)
        throw DomainError(what);
}

struct Window
{
    std::vector<double> f;
    std::vector<double> y;
};

Window select_window(const SpectrumTrace &t, double centre, double half_width)
{
    Window w;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (std::abs(t.freqs_hz[i] - centre) <= half_width)
        {
            w.f.push_back(t.freqs_hz[i]);
            w.y.push_back(t.values[i]);
        }
    return w;
}

double mean(std::span<const double> v)
{
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v)
{
    if (v.size() < 2)
        return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v)
        s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Results of the off-resonance stage, shared by every downstream rerun.
struct CavityStage
{
    double kappa = 0.0, kappa_sigma = 0.0;
    double kappa_e = 0.0, kappa_e_sigma = 0.0;
    double centre = 0.0, centre_sigma = 0.0;
    double noise = 0.0;
};

struct TailInputs
{
    CavityStage cav;
    double G_prior = 0.0;
    double gamma_prior = 0.0;
    double base_offset = 0.0; // omega_m - Delta - centre before the fitted shift
    // Additive shifts applied after each stage's own estimate.
    double jitter_shift = 0.0;
    double G_shift = 0.0;
    double gamma_shift = 0.0;
};

struct TailResult
{
    bool doublet = true;
    double jitter = 0.0, jitter_sigma = 0.0;
    double offset = 0.0, offset_sigma = 0.0;
    double sep_raw = 0.0, sep_corrected = 0.0;
    double G = 0.0, G_sigma = 0.0;
    double gamma = 0.0, gamma_sigma = 0.0;
    double C = 0.0;
    std::vector<Peak> single_peaks;
    Convergence convergence = Convergence::Converged;
    std::vector<StageEntry> log;
};

EitModelParams model_params(const TailInputs &in, double offset, double G, double gamma, double jitter,
                            JitterShape shape)
{
    EitModelParams p;
    p.centre_hz = in.cav.centre;
    p.kappa_hz = in.cav.kappa;
    p.kappa_e_hz = in.cav.kappa_e;
    p.G_hz = G;
    p.gamma_i_hz = gamma;
    p.mech_offset_hz = in.base_offset + offset;
    p.jitter = {shape, jitter};
    return p;
}

SpectrumTrace as_inverse(std::span<const double> f, std::span<const double> mag)
{
    SpectrumTrace t;
    t.kind = TraceKind::InversePower;
    t.freqs_hz.assign(f.begin(), f.end());
    t.values.reserve(mag.size());
    for (double v : mag)
        t.values.push_back(1.0 / std::max(v * v, 1e-300));
    return t;
}

// Peak separation of the smoothed inverse response; empty when the doublet
// is not resolved.
std::optional<PeakSplitting> smoothed_splitting(const SpectrumTrace &inverse, double centre, double G_scale)
{
    const double step = (inverse.freqs_hz.back() - inverse.freqs_hz.front()) /
                        static_cast<double>(inverse.size() - 1);
    const auto half = static_cast<std::size_t>(std::max(3.0, std::round(0.15 * G_scale / step)));
    SpectrumTrace smooth = inverse;
    double gain = 1.0;
    if (2 * half + 1 < inverse.size())
    {
        smooth.values = savitzky_golay(inverse.values, half);
        // Noise gain of the filter: root-sum-square of its impulse response.
        std::vector<double> impulse(4 * half + 1, 0.0);
        impulse[2 * half] = 1.0;
        gain = 0.0;
        for (double c : savitzky_golay(impulse, half))
            gain += c * c;
        gain = std::sqrt(gain);
    }
    auto split = peak_splitting(smooth, centre);
    if (!split)
        return split;
    // A dip that noise alone could produce is not a doublet.
    double dip = std::min(split->lower.value, split->upper.value);
    for (std::size_t k = split->lower.index; k <= split->upper.index; ++k)
        dip = std::min(dip, smooth.values[k]);
    const double noise = estimate_noise_sigma(inverse.values) * gain;
    if (std::min(split->lower.value, split->upper.value) - dip < 3.0 * noise)
        return std::nullopt;
    return split;
}

Convergence worse(Convergence a, Convergence b)
{
    return static_cast<int>(a) > static_cast<int>(b) ? a : b;
}

Convergence lm_convergence(const LmResult &r)
{
    if (r.status == LmStatus::Converged)
        return Convergence::Converged;
    return r.status == LmStatus::MaxIterations ? Convergence::MaxIter : Convergence::Degenerate;
}

// Stages two to four on the two-photon resonance trace.
TailResult run_tail(const SpectrumTrace &res, const TailInputs &in, const EitPipelineOptions &opts)
{
    TailResult out;
    const double c = in.cav.centre;
    const auto shape = opts.jitter_shape;

    // Stage 2: jitter width and feature position from the transparency window.
    {
        const Window w = select_window(res, c + in.base_offset, opts.stage2_window_factor * in.G_prior);
        require(w.f.size() >= 5, "fit_eit_pipeline: transparency window holds too few samples");
        const auto m = static_cast<Eigen::Index>(w.f.size());
        ResidualFn residual = [&](const Eigen::VectorXd &p) {
            const auto model =
                eit_model_magnitude(w.f, model_params(in, p[1], in.G_prior, in.gamma_prior, std::abs(p[0]), shape));
            Eigen::VectorXd r(m);
            for (Eigen::Index i = 0; i < m; ++i)
                r[i] = model[static_cast<std::size_t>(i)] - w.y[static_cast<std::size_t>(i)];
            return r;
        };
        const double gamma_eff = in.gamma_prior + 4.0 * in.G_prior * in.G_prior / in.cav.kappa;
        double best_cost = std::numeric_limits<double>::infinity();
        double seed = 0.0;
        for (double factor : {0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0})
        {
            Eigen::VectorXd p(2);
            p << factor * gamma_eff, 0.0;
            const double cost = residual(p).squaredNorm();
            if (cost < best_cost)
            {
                best_cost = cost;
                seed = factor * gamma_eff;
            }
        }
        Eigen::VectorXd p0(2);
        p0 << (seed > 0.0 ? seed : 0.05 * gamma_eff), 0.0;
        const LmResult lm = levenberg_marquardt(residual, p0);
        out.convergence = worse(out.convergence, lm_convergence(lm));
        out.jitter = std::abs(lm.params[0]) + in.jitter_shift;
        out.jitter = std::max(out.jitter, 0.0);
        out.jitter_sigma = lm.stderr_of(0);
        out.offset = lm.params[1];
        out.offset_sigma = lm.stderr_of(1);
        out.log.push_back({"transparency_window",
                           {{"G_prior_hz", in.G_prior}, {"gamma_i_prior_hz", in.gamma_prior},
                            {"samples", static_cast<double>(w.f.size())}, {"jitter_seed_hz", seed}},
                           {{"jitter_fwhm_hz", out.jitter}, {"mech_offset_hz", out.offset}},
                           ""});
    }

    // Stage 3: G from the splitting of the inverse response.
    const double feature = c + in.base_offset + out.offset;
    {
        const SpectrumTrace inverse = as_inverse(res.freqs_hz, res.values);
        const auto split = smoothed_splitting(inverse, feature, in.G_prior);
        if (!split)
        {
            out.doublet = false;
            out.convergence = Convergence::Degenerate;
            out.single_peaks = find_peaks(inverse);
            out.log.push_back({"peak_splitting", {{"centre_hz", feature}},
                               {{"peaks", static_cast<double>(out.single_peaks.size())}},
                               "no resolvable doublet"});
            return out;
        }
        out.sep_raw = split->separation_hz;

        // The smoothed maxima of a jittered, damped doublet sit slightly off
        // +-G; correct with the same procedure on the noiseless model.
        double G = out.sep_raw / 2.0;
        for (int iter = 0; iter < 2; ++iter)
        {
            const auto model = eit_model_magnitude(res.freqs_hz, model_params(in, out.offset, G, in.gamma_prior,
                                                                              out.jitter, shape));
            const auto msplit = smoothed_splitting(as_inverse(res.freqs_hz, model), feature, G);
            if (!msplit)
                break;
            G += (out.sep_raw - msplit->separation_hz) / 2.0;
        }
        out.sep_corrected = 2.0 * G;

        const Window w = select_window(res, feature, opts.stage4_window_factor * G);
        const auto m = static_cast<Eigen::Index>(w.f.size());
        const double sy = in.cav.noise > 0.0 ? in.cav.noise : 1.0;
        ResidualFn residual = [&](const Eigen::VectorXd &p) {
            const auto model = eit_model_magnitude(
                w.f, model_params(in, out.offset, std::abs(p[0]), in.gamma_prior, out.jitter, shape));
            Eigen::VectorXd r(m);
            for (Eigen::Index i = 0; i < m; ++i)
            {
                const double s = model[static_cast<std::size_t>(i)];
                const double y = w.y[static_cast<std::size_t>(i)];
                r[i] = (1.0 / (s * s) - 1.0 / (y * y)) / (2.0 * sy / (s * s * s));
            }
            return r;
        };
        Eigen::VectorXd p0(1);
        p0 << G;
        const LmResult lm = levenberg_marquardt(residual, p0);
        out.convergence = worse(out.convergence, lm_convergence(lm));
        out.G = std::abs(lm.params[0]) + in.G_shift;
        out.G_sigma = lm.stderr_of(0);
        if (!(out.G > 3.0 * out.G_sigma))
        {
            out.doublet = false;
            out.convergence = Convergence::Degenerate;
            out.single_peaks = find_peaks(inverse);
            out.log.push_back({"peak_splitting",
                               {{"centre_hz", feature}},
                               {{"separation_raw_hz", out.sep_raw}, {"G_hz", out.G}, {"G_sigma_hz", out.G_sigma}},
                               "splitting not significant after refinement"});
            return out;
        }
        out.log.push_back({"peak_splitting",
                           {{"centre_hz", feature}, {"jitter_fwhm_hz", out.jitter}},
                           {{"separation_raw_hz", out.sep_raw},
                            {"separation_corrected_hz", out.sep_corrected},
                            {"G_hz", out.G}},
                           "separation refined by least squares on the inverse response"});
    }

    // Stage 4: intrinsic damping from the jitter-aware inverse response.
    {
        const Window w = select_window(res, feature, opts.stage4_window_factor * out.G);
        const auto m = static_cast<Eigen::Index>(w.f.size());
        const double sy = in.cav.noise > 0.0 ? in.cav.noise : 1.0;
        ResidualFn residual = [&](const Eigen::VectorXd &p) {
            const auto model =
                eit_model_magnitude(w.f, model_params(in, out.offset, out.G, std::abs(p[0]), out.jitter, shape));
            Eigen::VectorXd r(m);
            for (Eigen::Index i = 0; i < m; ++i)
            {
                const double s = model[static_cast<std::size_t>(i)];
                const double y = w.y[static_cast<std::size_t>(i)];
                r[i] = (1.0 / (s * s) - 1.0 / (y * y)) / (2.0 * sy / (s * s * s));
            }
            return r;
        };
        double best_cost = std::numeric_limits<double>::infinity();
        double seed = in.gamma_prior;
        for (double factor : {0.25, 0.5, 1.0, 2.0, 4.0})
        {
            Eigen::VectorXd p(1);
            p << factor * in.gamma_prior;
            const double cost = residual(p).squaredNorm();
            if (cost < best_cost)
            {
                best_cost = cost;
                seed = factor * in.gamma_prior;
            }
        }
        Eigen::VectorXd p0(1);
        p0 << seed;
        const LmResult lm = levenberg_marquardt(residual, p0);
        out.convergence = worse(out.convergence, lm_convergence(lm));
        out.gamma = std::max(std::abs(lm.params[0]) + in.gamma_shift, 1e-12);
        out.gamma_sigma = lm.stderr_of(0);
        out.C = 4.0 * out.G * out.G / (in.cav.kappa * out.gamma);
        out.log.push_back({"inverse_fit",
                           {{"G_hz", out.G}, {"jitter_fwhm_hz", out.jitter}, {"gamma_i_seed_hz", seed},
                            {"samples", static_cast<double>(w.f.size())}},
                           {{"gamma_i_hz", out.gamma}, {"C", out.C}},
                           ""});
    }
    return out;
}

} // namespace

std::vector<double> savitzky_golay(std::span<const double> y, std::size_t half_window)
{
    const std::size_t n = y.size();
    std::vector<double> out(y.begin(), y.end());
    if (half_window == 0 || n < 2 * half_window + 1)
        return out;
    const auto m = static_cast<double>(half_window);
    const double norm = (2.0 * m - 1.0) * (2.0 * m + 1.0) * (2.0 * m + 3.0);
    std::vector<double> w(2 * half_window + 1);
    for (std::size_t k = 0; k < w.size(); ++k)
    {
        const double j = static_cast<double>(k) - m;
        w[k] = (3.0 * (3.0 * m * m + 3.0 * m - 1.0) - 15.0 * j * j) / norm;
    }
    for (std::size_t i = half_window; i + half_window < n; ++i)
    {
        double acc = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k)
            acc += w[k] * y[i - half_window + k];
        out[i] = acc;
    }
    return out;
}

std::vector<double> eit_model_magnitude(std::span<const double> freqs_hz, const EitModelParams &p)
{
    CavityPair cav;
    cav.kappa_plus = hz_to_rad(p.kappa_hz);
    cav.kappa_e_plus = hz_to_rad(p.kappa_e_hz);
    MechMode mech;
    mech.omega_m = hz_to_rad(p.mech_offset_hz);
    mech.gamma_i = hz_to_rad(p.gamma_i_hz);
    const double G = hz_to_rad(p.G_hz);
    std::vector<double> out;
    out.reserve(freqs_hz.size());
    for (double f : freqs_hz)
        out.push_back(s11_eit_jittered(hz_to_rad(f - p.centre_hz), cav, mech, G, 0.0, p.jitter).magnitude());
    return out;
}

FitReport fit_eit_pipeline(std::span<const SpectrumTrace> traces, const std::optional<RingdownPrior> &prior,
                           const EitPipelineOptions &opts)
{
    require(opts.omega_m_hz > 0.0, "fit_eit_pipeline: omega_m_hz must be positive");
    std::optional<std::size_t> res_index;
    double res_distance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < traces.size(); ++i)
    {
        require(traces[i].kind == TraceKind::Reflection, "fit_eit_pipeline: traces must be Reflection traces");
        require(traces[i].meta.drive_detuning_hz.has_value(), "fit_eit_pipeline: every trace needs a drive detuning");
        traces[i].validate();
        const double d = std::abs(*traces[i].meta.drive_detuning_hz - opts.omega_m_hz);
        if (d <= opts.resonance_tolerance_hz && d < res_distance)
        {
            res_distance = d;
            res_index = i;
        }
    }
    require(res_index.has_value(), "fit_eit_pipeline: no trace at the two-photon resonance");
    require(traces.size() >= 4, "fit_eit_pipeline: need at least three off-resonance traces");
    const SpectrumTrace &res = traces[*res_index];
    const double res_detuning = *res.meta.drive_detuning_hz;

    FitReport rep;

    // Stage 1: free Lorentzian fits, shared kappa_e, then refits at fixed kappa_e.
    std::vector<double> detunings, kes, ke_w, noise_sq;
    std::vector<LorentzianFitOptions> fit_opts;
    std::vector<std::size_t> used;
    for (std::size_t i = 0; i < traces.size(); ++i)
    {
        if (i == *res_index)
            continue;
        const double delta = *traces[i].meta.drive_detuning_hz;
        const double feature = opts.omega_m_hz - delta;
        LorentzianFitOptions lo;
        lo.masks.emplace_back(feature - opts.mask_halfwidth_hz, feature + opts.mask_halfwidth_hz);
        const FitReport f = fit_lorentzian(traces[i], lo);
        if (f.convergence == Convergence::Degenerate)
        {
            rep.warnings.push_back("off-resonance fit degenerate at drive detuning " + std::to_string(delta) + " Hz");
            continue;
        }
        detunings.push_back(delta);
        kes.push_back(f.value("kappa_e_hz"));
        const double s = f.sigma("kappa_e_hz");
        ke_w.push_back(s > 0.0 ? 1.0 / (s * s) : 1.0);
        fit_opts.push_back(lo);
        used.push_back(i);
    }
    require(detunings.size() >= 3, "fit_eit_pipeline: fewer than three usable off-resonance fits");

    CavityStage cav;
    {
        double wsum = 0.0, acc = 0.0;
        for (std::size_t k = 0; k < kes.size(); ++k)
        {
            acc += ke_w[k] * kes[k];
            wsum += ke_w[k];
        }
        cav.kappa_e = acc / wsum;
        cav.kappa_e_sigma = sample_std(kes);
    }

    std::vector<double> kappas, centres;
    for (std::size_t k = 0; k < used.size(); ++k)
    {
        LorentzianFitOptions lo = fit_opts[k];
        lo.fixed_kappa_e_hz = cav.kappa_e;
        const FitReport f = fit_lorentzian(traces[used[k]], lo);
        kappas.push_back(f.value("kappa_hz"));
        centres.push_back(f.value("centre_hz"));
        noise_sq.push_back(f.value("noise_rms") * f.value("noise_rms"));
    }
    {
        const double dm = mean(detunings);
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t k = 0; k < detunings.size(); ++k)
        {
            sxx += (detunings[k] - dm) * (detunings[k] - dm);
            sxy += (detunings[k] - dm) * (kappas[k] - mean(kappas));
        }
        const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
        const double intercept = mean(kappas) - slope * dm;
        cav.kappa = intercept + slope * res_detuning;
        double ss = 0.0;
        for (std::size_t k = 0; k < detunings.size(); ++k)
        {
            const double r = kappas[k] - intercept - slope * detunings[k];
            ss += r * r;
        }
        cav.kappa_sigma = std::sqrt(ss / static_cast<double>(detunings.size() - 2));
        cav.centre = mean(centres);
        cav.centre_sigma = sample_std(centres);
        cav.noise = std::sqrt(mean(noise_sq));
        rep.stage_log.push_back({"off_resonance_lorentzians",
                                 {{"traces", static_cast<double>(detunings.size())},
                                  {"mask_halfwidth_hz", opts.mask_halfwidth_hz}},
                                 {{"kappa_plus_hz", cav.kappa},
                                  {"kappa_plus_slope", slope},
                                  {"kappa_e_plus_hz", cav.kappa_e},
                                  {"centre_hz", cav.centre},
                                  {"noise_rms", cav.noise}},
                                 "kappa_e shared across detunings; kappa_plus regressed against drive detuning"});
    }
    require(cav.kappa > 0.0 && cav.kappa_e > 0.0, "fit_eit_pipeline: stage-one cavity rates are not positive");

    TailInputs base;
    base.cav = cav;
    base.base_offset = opts.omega_m_hz - res_detuning - cav.centre;
    double G_prior_sigma = 0.0, gamma_prior_sigma = 0.0;
    if (prior)
    {
        base.G_prior = prior->G_hz;
        base.gamma_prior = prior->gamma_i_hz;
        G_prior_sigma = prior->G_sigma_hz;
        gamma_prior_sigma = prior->gamma_i_sigma_hz;
    }
    else
    {
        const auto split = smoothed_splitting(as_inverse(res.freqs_hz, res.values), cav.centre + base.base_offset,
                                              (res.freqs_hz.back() - res.freqs_hz.front()) / 20.0);
        base.G_prior = split ? split->separation_hz / 2.0 : (res.freqs_hz.back() - res.freqs_hz.front()) / 20.0;
        base.gamma_prior = 4.0 * base.G_prior * base.G_prior / cav.kappa / 20.0;
        rep.warnings.push_back("no ringdown prior; stage two seeded from the inverse-response peaks");
    }
    require(base.G_prior > 0.0 && base.gamma_prior > 0.0, "fit_eit_pipeline: priors must be positive");

    const TailResult nominal = run_tail(res, base, opts);
    for (const auto &e : nominal.log)
        rep.stage_log.push_back(e);
    rep.convergence = nominal.convergence;

    rep.set("kappa_plus_hz", cav.kappa, cav.kappa_sigma, "Hz");
    rep.set("kappa_e_plus_hz", cav.kappa_e, cav.kappa_e_sigma, "Hz");
    rep.set("centre_hz", cav.centre, cav.centre_sigma, "Hz");

    if (!nominal.doublet)
    {
        rep.set("jitter_fwhm_hz", nominal.jitter, nominal.jitter_sigma, "Hz");
        std::string diag = "inverse response shows a single peak";
        if (!nominal.single_peaks.empty())
        {
            const auto top = std::max_element(nominal.single_peaks.begin(), nominal.single_peaks.end(),
                                              [](const Peak &a, const Peak &b) { return a.value < b.value; });
            diag += " at " + std::to_string(top->freq_hz) + " Hz";
        }
        rep.warnings.push_back(diag + "; G and gamma_i not reported");
        return rep;
    }

    // Propagate each input uncertainty by rerunning the downstream stages.
    double var_jitter = nominal.jitter_sigma * nominal.jitter_sigma;
    double var_offset = nominal.offset_sigma * nominal.offset_sigma;
    double var_G = nominal.G_sigma * nominal.G_sigma;
    double var_gamma = nominal.gamma_sigma * nominal.gamma_sigma;
    double var_C = 0.0;
    if (opts.propagate_uncertainty)
    {
        struct Source
        {
            const char *name;
            double sigma;
            void (*apply)(TailInputs &, double);
            int stage; // first stage whose own estimate this perturbs
        };
        const Source sources[] = {
            {"kappa_plus", cav.kappa_sigma, [](TailInputs &t, double d) { t.cav.kappa += d; }, 1},
            {"kappa_e_plus", cav.kappa_e_sigma, [](TailInputs &t, double d) { t.cav.kappa_e += d; }, 1},
            {"centre", cav.centre_sigma,
             [](TailInputs &t, double d) {
                 t.cav.centre += d;
                 t.base_offset -= d;
             },
             1},
            {"G_prior", G_prior_sigma, [](TailInputs &t, double d) { t.G_prior += d; }, 1},
            {"gamma_i_prior", gamma_prior_sigma, [](TailInputs &t, double d) { t.gamma_prior += d; }, 1},
            {"jitter", nominal.jitter_sigma, [](TailInputs &t, double d) { t.jitter_shift += d; }, 2},
            {"G", nominal.G_sigma, [](TailInputs &t, double d) { t.G_shift += d; }, 3},
            {"gamma_i", nominal.gamma_sigma, [](TailInputs &t, double d) { t.gamma_shift += d; }, 4},
        };
        NamedValues contributions;
        for (const auto &src : sources)
        {
            if (!(src.sigma > 0.0))
                continue;
            TailInputs up = base, down = base;
            src.apply(up, src.sigma);
            src.apply(down, -src.sigma);
            if (up.G_prior <= 0.0 || down.G_prior <= 0.0 || up.gamma_prior <= 0.0 || down.gamma_prior <= 0.0)
            {
                rep.warnings.push_back(std::string("prior perturbation skipped for ") + src.name);
                continue;
            }
            const TailResult a = run_tail(res, up, opts);
            const TailResult b = run_tail(res, down, opts);
            if (!a.doublet || !b.doublet)
            {
                rep.warnings.push_back(std::string("doublet lost when perturbing ") + src.name);
                continue;
            }
            auto half = [](double x, double y) { return 0.5 * (x - y); };
            if (src.stage < 2)
            {
                var_jitter += std::pow(half(a.jitter, b.jitter), 2);
                var_offset += std::pow(half(a.offset, b.offset), 2);
            }
            if (src.stage < 3)
                var_G += std::pow(half(a.G, b.G), 2);
            if (src.stage < 4)
                var_gamma += std::pow(half(a.gamma, b.gamma), 2);
            // C depends on kappa directly as well as through the tail.
            const double dC = half(a.C, b.C);
            var_C += dC * dC;
            contributions.emplace_back(std::string("dC_") + src.name, dC);
        }
        rep.stage_log.push_back({"uncertainty_propagation",
                                 {{"sources", static_cast<double>(std::size(sources))}},
                                 contributions,
                                 "half-differences of +-1 sigma reruns, added in quadrature"});
    }
    else
    {
        const double rel2 = std::pow(2.0 * nominal.G_sigma / nominal.G, 2) +
                            std::pow(cav.kappa_sigma / cav.kappa, 2) +
                            std::pow(nominal.gamma_sigma / nominal.gamma, 2);
        var_C = nominal.C * nominal.C * rel2;
    }

    rep.set("jitter_fwhm_hz", nominal.jitter, std::sqrt(var_jitter), "Hz");
    rep.set("mech_offset_hz", nominal.offset, std::sqrt(var_offset), "Hz");
    rep.set("G_hz", nominal.G, std::sqrt(var_G), "Hz");
    rep.set("gamma_i_hz", nominal.gamma, std::sqrt(var_gamma), "Hz");
    rep.set("C", nominal.C, std::sqrt(var_C), "");
    rep.residual_norm = 0.0;
    {
        const auto model = eit_model_magnitude(
            res.freqs_hz, model_params(base, nominal.offset, nominal.G, nominal.gamma, nominal.jitter, opts.jitter_shape));
        double ss = 0.0;
        for (std::size_t i = 0; i < model.size(); ++i)
            ss += std::pow(model[i] - res.values[i], 2);
        rep.residual_norm = std::sqrt(ss);
    }
    return rep;
}

} // namespace emx
