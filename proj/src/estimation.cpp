#include "emx/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>

namespace emx
{
namespace
{
using cplx = std::complex<double>;

void require(bool cond, const char *what)
{
    if (!cond)
        throw DomainError(what);
}

Convergence from_lm(LmStatus s)
{
    switch (s)
    {
    case LmStatus::Converged:
        return Convergence::Converged;
    case LmStatus::MaxIterations:
        return Convergence::MaxIter;
    case LmStatus::Failed:
        return Convergence::Degenerate;
    }
    return Convergence::Degenerate;
}

double median(std::vector<double> v)
{
    if (v.empty())
        return 0.0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1)
        return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

struct LineFit
{
    double intercept = 0.0;
    double slope = 0.0;
    double var_intercept = 0.0;
    double var_slope = 0.0;
    double cov = 0.0;
    double chi2 = 0.0;
    std::size_t n = 0;
};

// Weighted straight line; covariance scaled by the residual variance.
LineFit weighted_line(std::span<const double> x, std::span<const double> y, std::span<const double> w)
{
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
        sxx += w[i] * x[i] * x[i];
        sxy += w[i] * x[i] * y[i];
    }
    const double det = sw * sxx - sx * sx;
    if (!(det > 0.0))
        throw DomainError("weighted_line: degenerate abscissae");
    LineFit f;
    f.n = x.size();
    f.slope = (sw * sxy - sx * sy) / det;
    f.intercept = (sxx * sy - sx * sxy) / det;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        const double r = y[i] - f.intercept - f.slope * x[i];
        f.chi2 += w[i] * r * r;
    }
    const double s2 = f.n > 2 ? f.chi2 / static_cast<double>(f.n - 2) : 0.0;
    f.var_slope = s2 * sw / det;
    f.var_intercept = s2 * sxx / det;
    f.cov = -s2 * sx / det;
    return f;
}
} // namespace

std::string to_string(Convergence c)
{
    switch (c)
    {
    case Convergence::Converged:
        return "Converged";
    case Convergence::MaxIter:
        return "MaxIter";
    case Convergence::Degenerate:
        return "Degenerate";
    }
    return "Degenerate";
}

Convergence convergence_from_string(const std::string &s)
{
    if (s == "Converged")
        return Convergence::Converged;
    if (s == "MaxIter")
        return Convergence::MaxIter;
    if (s == "Degenerate")
        return Convergence::Degenerate;
    throw DomainError("unknown convergence state: " + s);
}

void FitReport::set(const std::string &name, double value, double sigma, const std::string &unit)
{
    require(sigma >= 0.0 || std::isnan(sigma), "FitReport: standard errors must be non-negative");
    for (auto &[key, est] : params)
    {
        if (key == name)
        {
            est = {value, sigma, unit};
            return;
        }
    }
    params.emplace_back(name, ParamEstimate{value, sigma, unit});
}

bool FitReport::has(const std::string &name) const
{
    return std::any_of(params.begin(), params.end(), [&](const auto &p) { return p.first == name; });
}

const ParamEstimate &FitReport::at(const std::string &name) const
{
    for (const auto &[key, est] : params)
        if (key == name)
            return est;
    throw std::out_of_range("FitReport: no parameter named " + name);
}

// --- Lorentzian ------------------------------------------------------------

double lorentzian_reflection(double f_hz, double centre_hz, double kappa_hz, double kappa_e_hz)
{
    return std::abs(1.0 - kappa_e_hz / cplx(kappa_hz / 2.0, f_hz - centre_hz));
}

FitReport fit_lorentzian(const SpectrumTrace &trace, const LorentzianFitOptions &opts)
{
    require(trace.kind == TraceKind::Reflection, "fit_lorentzian: trace must be a Reflection trace");
    trace.validate();

    std::vector<double> x, y;
    for (std::size_t i = 0; i < trace.size(); ++i)
    {
        const double f = trace.freqs_hz[i];
        const bool masked = std::any_of(opts.masks.begin(), opts.masks.end(),
                                        [f](const auto &m) { return f >= m.first && f <= m.second; });
        if (!masked)
        {
            x.push_back(f);
            y.push_back(trace.values[i]);
        }
    }
    const bool fixed_ke = opts.fixed_kappa_e_hz.has_value();
    const std::size_t n_par = fixed_ke ? 2 : 3;
    require(x.size() > n_par + 1, "fit_lorentzian: too few unmasked samples");

    // Seeds: dip position, then the width at half depth of |S|^2.
    const auto imin = static_cast<std::size_t>(std::min_element(y.begin(), y.end()) - y.begin());
    const double depth = std::max(y[imin], 0.0);
    const double level = 0.5 * (1.0 + depth * depth);
    std::size_t l = imin, r = imin;
    while (l > 0 && y[l] * y[l] < level)
        --l;
    while (r + 1 < y.size() && y[r] * y[r] < level)
        ++r;
    double kappa0 = x[r] - x[l];
    if (kappa0 <= 0.0)
        kappa0 = (x.back() - x.front()) / 4.0;
    const double ke0 = fixed_ke ? *opts.fixed_kappa_e_hz : 0.5 * kappa0 * (1.0 - depth);

    Eigen::VectorXd p0(static_cast<Eigen::Index>(n_par));
    p0[0] = x[imin];
    p0[1] = kappa0;
    if (!fixed_ke)
        p0[2] = ke0;

    auto unpack = [&](const Eigen::VectorXd &p) {
        return std::array<double, 3>{p[0], p[1], fixed_ke ? *opts.fixed_kappa_e_hz : p[2]};
    };
    const auto m = static_cast<Eigen::Index>(x.size());
    ResidualFn residual = [&](const Eigen::VectorXd &p) {
        const auto [c, k, ke] = unpack(p);
        Eigen::VectorXd res(m);
        for (Eigen::Index i = 0; i < m; ++i)
            res[i] = lorentzian_reflection(x[static_cast<std::size_t>(i)], c, k, ke) - y[static_cast<std::size_t>(i)];
        return res;
    };
    JacobianFn jacobian = [&](const Eigen::VectorXd &p) {
        const auto [c, k, ke] = unpack(p);
        Eigen::MatrixXd J(m, static_cast<Eigen::Index>(n_par));
        for (Eigen::Index i = 0; i < m; ++i)
        {
            const cplx d(k / 2.0, x[static_cast<std::size_t>(i)] - c);
            const cplx s = 1.0 - ke / d;
            const double mag = std::max(std::abs(s), 1e-300);
            const cplx dd2 = ke / (d * d);
            auto dmag = [&](cplx ds) { return std::real(std::conj(s) * ds) / mag; };
            J(i, 0) = dmag(dd2 * cplx(0.0, -1.0));
            J(i, 1) = dmag(0.5 * dd2);
            if (!fixed_ke)
                J(i, 2) = dmag(-1.0 / d);
        }
        return J;
    };

    const LmResult lm = levenberg_marquardt(residual, p0, jacobian, opts.lm);
    const auto [c, k, ke] = unpack(lm.params);

    FitReport rep;
    rep.convergence = from_lm(lm.status);
    rep.residual_norm = std::sqrt(lm.chi2);
    rep.set("centre_hz", c, lm.stderr_of(0), "Hz");
    rep.set("kappa_hz", k, lm.stderr_of(1), "Hz");
    rep.set("kappa_e_hz", ke, fixed_ke ? 0.0 : lm.stderr_of(2), "Hz");
    rep.set("noise_rms", std::sqrt(lm.reduced_chi2()), 0.0, "");
    if (!(k > 0.0) || ke < 0.0 || ke > k)
    {
        rep.convergence = Convergence::Degenerate;
        rep.warnings.push_back("fitted kappa_e outside [0, kappa]");
    }
    rep.stage_log.push_back({"lorentzian",
                             {{"samples", static_cast<double>(x.size())}, {"kappa_seed_hz", kappa0}},
                             {{"kappa_hz", k}, {"kappa_e_hz", ke}, {"iterations", static_cast<double>(lm.iterations)}},
                             fixed_ke ? "kappa_e held fixed" : ""});
    return rep;
}

// --- Ringdown --------------------------------------------------------------

double estimate_noise_sigma(std::span<const double> y)
{
    if (y.size() < 3)
        return 0.0;
    std::vector<double> d(y.size() - 1);
    for (std::size_t i = 0; i + 1 < y.size(); ++i)
        d[i] = y[i + 1] - y[i];
    const double med = median(d);
    for (double &v : d)
        v = std::abs(v - med);
    return 1.4826 * median(d) / std::sqrt(2.0);
}

FitReport fit_ringdown(const RingdownTrace &trace, const RingdownFitOptions &opts)
{
    trace.validate();
    const std::size_t n = trace.size();
    require(n >= 8, "fit_ringdown: need at least eight samples");
    const auto &t = trace.times;
    const auto &y = trace.power;
    const double sigma = opts.noise_sigma.value_or(estimate_noise_sigma(y));
    const double floor = opts.floor_factor * sigma;

    FitReport rep;
    auto degenerate = [&](const std::string &why) {
        rep.convergence = Convergence::Degenerate;
        rep.warnings.push_back(why);
        rep.stage_log.push_back({"ringdown", {{"noise_sigma", sigma}}, {}, why});
        return rep;
    };

    // End of the usable tail: first sample where a 5-point running mean drops
    // below the noise floor.
    std::size_t end = n;
    for (std::size_t i = 0; i + 5 <= n; ++i)
    {
        const double mean = std::accumulate(y.begin() + static_cast<std::ptrdiff_t>(i),
                                            y.begin() + static_cast<std::ptrdiff_t>(i + 5), 0.0) / 5.0;
        if (mean < floor)
        {
            end = i;
            break;
        }
    }
    if (end < 8)
        return degenerate("slow tail below noise floor");

    auto log_line = [&](std::size_t lo, std::size_t hi) -> std::optional<LineFit> {
        std::vector<double> xs, ls, ws;
        for (std::size_t i = lo; i < hi; ++i)
            if (y[i] > 0.0)
            {
                xs.push_back(t[i]);
                ls.push_back(std::log(y[i]));
                ws.push_back(1.0);
            }
        if (xs.size() < 2)
            return std::nullopt;
        return weighted_line(xs, ls, ws);
    };

    const auto asym = log_line(end / 2, end);
    if (!asym || asym->slope >= 0.0)
        return degenerate("no decaying tail");
    const double slope_asym = std::abs(asym->slope);

    // Breakpoint between cavity leakage and mechanical decay.
    std::size_t bp = 0;
    const std::size_t win = std::max<std::size_t>(opts.slope_window, 2);
    for (std::size_t i = 0; i + win <= end; ++i)
    {
        const auto local = log_line(i, i + win);
        if (local && std::abs(local->slope) < opts.breakpoint_factor * slope_asym)
        {
            bp = i;
            break;
        }
    }

    // Log-space tail fit, reweighted by the model so each sample carries the
    // variance sigma^2 / model^2 of its logarithm.
    double log_a = asym->intercept;
    double rate = slope_asym;
    LineFit tail;
    std::size_t used = 0;
    for (int iter = 0; iter < 5; ++iter)
    {
        std::vector<double> xs, ls, ws;
        for (std::size_t i = bp; i < n; ++i)
        {
            const double model = std::exp(log_a - rate * t[i]);
            if (model <= floor || y[i] <= 0.0)
                continue;
            xs.push_back(t[i]);
            ls.push_back(std::log(y[i]));
            ws.push_back(model * model);
        }
        if (xs.size() < 5)
            return degenerate("slow tail below noise floor");
        tail = weighted_line(xs, ls, ws);
        log_a = tail.intercept;
        rate = -tail.slope;
        used = xs.size();
        if (!(rate > 0.0))
            return degenerate("fitted tail does not decay");
    }

    rep.residual_norm = std::sqrt(tail.chi2);
    rep.set("gamma_m_hz", rad_to_hz(rate), rad_to_hz(std::sqrt(tail.var_slope)), "Hz");
    rep.set("amplitude_mech", std::exp(log_a), std::exp(log_a) * std::sqrt(tail.var_intercept), "");

    NamedValues outputs{{"gamma_m_hz", rad_to_hz(rate)}, {"tail_samples", static_cast<double>(used)}};
    if (bp >= 3)
    {
        std::vector<double> xs, ls, ws;
        for (std::size_t i = 0; i < bp; ++i)
        {
            const double z = y[i] - std::exp(log_a - rate * t[i]);
            if (z > floor)
            {
                xs.push_back(t[i]);
                ls.push_back(std::log(z));
                ws.push_back(z * z);
            }
        }
        if (xs.size() >= 3)
        {
            const auto fast = weighted_line(xs, ls, ws);
            if (fast.slope < 0.0)
            {
                rep.set("kappa_plus_hz", rad_to_hz(-fast.slope), rad_to_hz(std::sqrt(fast.var_slope)), "Hz");
                outputs.emplace_back("kappa_plus_hz", rad_to_hz(-fast.slope));
            }
        }
    }
    rep.stage_log.push_back({"breakpoint",
                             {{"noise_sigma", sigma}, {"asymptotic_slope", slope_asym}},
                             {{"breakpoint_index", static_cast<double>(bp)},
                              {"breakpoint_time_s", t[bp]}},
                             bp == 0 ? "no fast segment" : ""});
    rep.stage_log.push_back({"tail_fit", {{"first_index", static_cast<double>(bp)}}, outputs, ""});
    return rep;
}

// --- g0 slope --------------------------------------------------------------

FitReport fit_g0_slope(std::span<const DampingPoint> points, double kappa_plus)
{
    require(kappa_plus > 0.0, "fit_g0_slope: kappa_plus must be positive");
    require(points.size() >= 3, "fit_g0_slope: need at least three points");
    std::vector<double> x, y, w;
    for (const auto &p : points)
    {
        require(p.weight > 0.0, "fit_g0_slope: weights must be positive");
        x.push_back(p.n_d);
        y.push_back(p.gamma_m);
        w.push_back(p.weight);
    }
    std::vector<double> distinct = x;
    std::sort(distinct.begin(), distinct.end());
    require(std::adjacent_find(distinct.begin(), distinct.end()) == distinct.end(),
            "fit_g0_slope: n_d values must be distinct");

    const LineFit f = weighted_line(x, y, w);
    FitReport rep;
    rep.residual_norm = std::sqrt(f.chi2);
    const double sig_slope = std::sqrt(f.var_slope);
    double g0 = 0.0;
    double g0_sigma = 0.0;
    if (f.slope < 0.0)
    {
        rep.convergence = Convergence::Degenerate;
        rep.warnings.push_back("negative damping slope");
    }
    else
    {
        g0 = std::sqrt(f.slope * kappa_plus / 4.0);
        g0_sigma = g0 > 0.0 ? sig_slope * kappa_plus / (8.0 * g0) : std::sqrt(sig_slope * kappa_plus / 4.0);
    }
    rep.set("g0_pm_hz", rad_to_hz(g0), rad_to_hz(g0_sigma), "Hz");
    rep.set("g0_hz", rad_to_hz(2.0 * g0), rad_to_hz(2.0 * g0_sigma), "Hz");
    rep.set("gamma_i_intercept_hz", rad_to_hz(f.intercept), rad_to_hz(std::sqrt(f.var_intercept)), "Hz");
    rep.set("slope_hz", rad_to_hz(f.slope), rad_to_hz(sig_slope), "Hz");
    rep.stage_log.push_back({"damping_regression",
                             {{"points", static_cast<double>(points.size())}, {"kappa_plus_hz", rad_to_hz(kappa_plus)}},
                             {{"slope_hz", rad_to_hz(f.slope)}, {"g0_pm_hz", rad_to_hz(g0)}},
                             ""});
    return rep;
}

// --- occupancy ---------------------------------------------------------------

OccupancyCalibration calibrate_occupancy(const SpectrumTrace &npsd, double gain_db, double gamma_em,
                                         const CavityPair &cav)
{
    require(npsd.kind == TraceKind::NPSD, "calibrate_occupancy: trace must be an NPSD trace");
    require(gamma_em > 0.0, "calibrate_occupancy: gamma_em must be positive");
    require(cav.kappa_plus > 0.0 && cav.kappa_e_plus > 0.0, "calibrate_occupancy: cavity rates must be positive");
    npsd.validate();

    std::vector<double> quanta = npsd.values;
    const auto units = npsd.meta.extra.find("units");
    if (units != npsd.meta.extra.end() && units->second == "W/Hz")
    {
        const double gain = std::pow(10.0, gain_db / 10.0);
        const double photon = constants::kHbar * cav.omega_plus();
        require(photon > 0.0, "calibrate_occupancy: omega_plus must be positive");
        for (double &v : quanta)
            v /= gain * photon;
    }

    OccupancyCalibration out;
    out.area_hz = trapezoid_area(npsd.freqs_hz, quanta);
    if (out.area_hz < 0.0)
    {
        out.warnings.push_back("negative background-subtracted area; reporting zero occupancy");
        out.n_m = 0.0;
        return out;
    }
    out.n_m = out.area_hz * cav.kappa_plus / (cav.kappa_e_plus * gamma_em);
    return out;
}

// --- heating -----------------------------------------------------------------

double heating_shape(double t, double n_bath_m, double n_hot, double gamma, double n_delta, double gamma_s)
{
    const double decay = std::exp(-gamma * t);
    double n = n_bath_m * decay - n_hot * std::expm1(-gamma * t);
    const double gap = std::abs(gamma - gamma_s) * t;
    const double diff = gamma_s < gamma ? -std::exp(-gamma_s * t) * std::expm1(-gap) : decay * std::expm1(-gap);
    return n + n_delta * diff;
}

FitReport fit_heating(std::span<const double> times, std::span<const double> n_m)
{
    require(times.size() == n_m.size(), "fit_heating: size mismatch");
    require(times.size() >= 10, "fit_heating: need at least ten samples");
    const std::size_t n = times.size();
    const auto m = static_cast<Eigen::Index>(n);

    const double nb0 = (n_m[0] + n_m[1] + n_m[2]) / 3.0;
    const std::size_t tail = std::max<std::size_t>(n / 10, 3);
    const double nh0 = std::accumulate(n_m.end() - static_cast<std::ptrdiff_t>(tail), n_m.end(), 0.0) /
                       static_cast<double>(tail);
    double t63 = times.back() / 3.0;
    for (std::size_t i = 0; i < n; ++i)
        if ((n_m[i] - nb0) >= 0.63 * (nh0 - nb0))
        {
            t63 = std::max(times[i], times[1]);
            break;
        }
    const double g0 = 1.0 / t63;

    ResidualFn residual = [&](const Eigen::VectorXd &p) {
        Eigen::VectorXd r(m);
        for (Eigen::Index i = 0; i < m; ++i)
        {
            const auto k = static_cast<std::size_t>(i);
            r[i] = heating_shape(times[k], p[0], p[1], std::abs(p[2]), p[3], std::abs(p[4])) - n_m[k];
        }
        return r;
    };

    LmResult best;
    bool have = false;
    for (double ratio : {1.0 / 30.0, 0.1, 1.0 / 3.0})
    {
        Eigen::VectorXd p0(5);
        p0 << nb0, nh0, g0, 0.0, g0 * ratio;
        LmOptions opts;
        const LmResult lm = levenberg_marquardt(residual, p0, std::nullopt, opts);
        if (std::isfinite(lm.chi2) && (!have || lm.chi2 < best.chi2))
        {
            best = lm;
            have = true;
        }
    }

    FitReport rep;
    rep.convergence = from_lm(best.status);
    rep.residual_norm = std::sqrt(best.chi2);
    rep.set("n_bath_m", best.params[0], best.stderr_of(0), "");
    rep.set("n_hot", best.params[1], best.stderr_of(1), "");
    rep.set("gamma_hz", rad_to_hz(std::abs(best.params[2])), rad_to_hz(best.stderr_of(2)), "Hz");
    rep.set("n_delta", best.params[3], best.stderr_of(3), "");
    rep.set("gamma_s_hz", rad_to_hz(std::abs(best.params[4])), rad_to_hz(best.stderr_of(4)), "Hz");
    rep.stage_log.push_back({"heating_fit",
                             {{"samples", static_cast<double>(n)}, {"n_bath_seed", nb0}, {"n_hot_seed", nh0}},
                             {{"n_bath_m", best.params[0]}, {"n_hot", best.params[1]}},
                             ""});
    return rep;
}

} // namespace emx
