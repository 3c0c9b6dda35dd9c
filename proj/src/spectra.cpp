#include "emx/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace emx
{
namespace
{
using cplx = std::complex<double>;

constexpr double kFwhmToSigma = 0.42466090014400953; // 1 / (2 sqrt(2 ln 2))

void require(bool cond, const char *what)
{
    if (!cond)
        throw DomainError(what);
}

cplx s11_value(double delta_probe, double kappa, double kappa_e, double gamma_i, double G,
               double mech_offset)
{
    // mech_offset = omega_m - Delta_{r+,d}
    const cplx mech = 2.0 * G * G / cplx(gamma_i, 2.0 * (delta_probe - mech_offset));
    const cplx denom = cplx(kappa / 2.0, delta_probe) + mech;
    if (denom == 0.0)
        throw SingularityError("s11_eit: degenerate denominator");
    return 1.0 - kappa_e / denom;
}

unsigned regime_flags(const CavityPair &cav, const MechMode &mech)
{
    return mech.sideband_resolved(cav) ? ComplexResponse::kNone : ComplexResponse::kUnresolvedSidebands;
}
} // namespace

std::string to_string(TraceKind kind)
{
    switch (kind)
    {
    case TraceKind::Reflection:
        return "Reflection";
    case TraceKind::InversePower:
        return "InversePower";
    case TraceKind::NPSD:
        return "NPSD";
    }
    return "Reflection";
}

TraceKind trace_kind_from_string(const std::string &s)
{
    if (s == "Reflection")
        return TraceKind::Reflection;
    if (s == "InversePower")
        return TraceKind::InversePower;
    if (s == "NPSD")
        return TraceKind::NPSD;
    throw DomainError("unknown spectrum kind: " + s);
}

void SpectrumTrace::validate() const
{
    require(freqs_hz.size() == values.size(), "SpectrumTrace: freqs and values differ in length");
    require(freqs_hz.size() >= 2, "SpectrumTrace: need at least two samples");
    for (std::size_t i = 0; i < freqs_hz.size(); ++i)
    {
        require(std::isfinite(freqs_hz[i]) && std::isfinite(values[i]), "SpectrumTrace: non-finite sample");
        if (i > 0)
            require(freqs_hz[i] > freqs_hz[i - 1], "SpectrumTrace: freqs not strictly increasing");
    }
}

std::vector<double> JitterKernel::sample(double spacing_hz, double max_half_span_hz) const
{
    require(fwhm_hz >= 0.0, "JitterKernel: fwhm must be non-negative");
    require(spacing_hz > 0.0, "JitterKernel: spacing must be positive");
    if (fwhm_hz == 0.0)
        return {1.0};

    double reach = 0.0;
    if (shape == JitterShape::Gaussian)
        reach = 8.0 * fwhm_hz * kFwhmToSigma;
    else
        reach = max_half_span_hz;
    reach = std::min(reach, max_half_span_hz);
    const auto half = static_cast<std::size_t>(std::ceil(reach / spacing_hz));

    std::vector<double> w(2 * half + 1);
    for (std::size_t k = 0; k < w.size(); ++k)
    {
        const double x = (static_cast<double>(k) - static_cast<double>(half)) * spacing_hz;
        if (shape == JitterShape::Gaussian)
        {
            const double sigma = fwhm_hz * kFwhmToSigma;
            w[k] = std::exp(-0.5 * x * x / (sigma * sigma));
        }
        else
        {
            const double hw = fwhm_hz / 2.0;
            w[k] = hw / (x * x + hw * hw);
        }
    }
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (double &v : w)
        v /= sum;
    return w;
}

std::vector<double> linear_grid(double start, double stop, std::size_t points)
{
    require(points >= 2, "linear_grid: need at least two points");
    require(stop > start, "linear_grid: stop must exceed start");
    std::vector<double> g(points);
    const double step = (stop - start) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i)
        g[i] = start + step * static_cast<double>(i);
    g.back() = stop;
    return g;
}

ComplexResponse s11_eit(double delta_probe, const CavityPair &cav, const MechMode &mech, double G,
                        double delta_drive)
{
    const cplx s = s11_value(delta_probe, cav.kappa_plus, cav.kappa_e_plus, mech.gamma_i, G,
                             mech.omega_m - delta_drive);
    return {s, ResponseUnit::Dimensionless, regime_flags(cav, mech)};
}

ComplexResponse s11_eit_jittered(double delta_probe, const CavityPair &cav, const MechMode &mech,
                                 double G, double delta_drive, const JitterKernel &jitter)
{
    require(jitter.fwhm_hz >= 0.0, "s11_eit_jittered: fwhm must be non-negative");
    const double offset = mech.omega_m - delta_drive;
    const double width = hz_to_rad(jitter.fwhm_hz);
    if (width == 0.0 || G == 0.0)
        return s11_eit(delta_probe, cav, mech, G, delta_drive);

    if (jitter.shape == JitterShape::Lorentzian)
    {
        const cplx s = s11_value(delta_probe, cav.kappa_plus, cav.kappa_e_plus, mech.gamma_i + width, G, offset);
        return {s, ResponseUnit::Dimensionless, regime_flags(cav, mech)};
    }

    // The integrand is analytic in the offset with its nearest pole about
    // gamma_eff/2 from the real axis, so the trapezoid rule converges
    // geometrically once the node spacing resolves gamma_eff.
    const double sigma = width * kFwhmToSigma;
    const double gamma_eff = mech.gamma_i + (cav.kappa_plus > 0.0 ? 4.0 * G * G / cav.kappa_plus : 0.0);
    double h = sigma / 8.0;
    if (gamma_eff > 0.0)
        h = std::min(h, gamma_eff / 8.0);
    constexpr std::size_t kMaxHalf = 4000;
    auto half = static_cast<std::size_t>(std::ceil(7.0 * sigma / h));
    if (half > kMaxHalf)
    {
        half = kMaxHalf;
        h = 7.0 * sigma / static_cast<double>(half);
    }

    cplx acc = 0.0;
    double wsum = 0.0;
    for (std::size_t k = 0; k <= 2 * half; ++k)
    {
        const double eps = (static_cast<double>(k) - static_cast<double>(half)) * h;
        const double w = std::exp(-0.5 * eps * eps / (sigma * sigma));
        acc += w * s11_value(delta_probe, cav.kappa_plus, cav.kappa_e_plus, mech.gamma_i, G, offset + eps);
        wsum += w;
    }
    return {acc / wsum, ResponseUnit::Dimensionless, regime_flags(cav, mech)};
}

SpectrumTrace reflection_trace(std::span<const double> freqs_hz, const CavityPair &cav,
                               const MechMode &mech, double G, double delta_drive,
                               const JitterKernel &jitter)
{
    SpectrumTrace t;
    t.kind = TraceKind::Reflection;
    t.freqs_hz.assign(freqs_hz.begin(), freqs_hz.end());
    t.values.reserve(freqs_hz.size());
    for (double f : freqs_hz)
        t.values.push_back(s11_eit_jittered(hz_to_rad(f), cav, mech, G, delta_drive, jitter).magnitude());
    t.meta.drive_detuning_hz = rad_to_hz(delta_drive);
    return t;
}

SpectrumTrace inverse_response(const SpectrumTrace &trace)
{
    require(trace.kind == TraceKind::Reflection, "inverse_response: trace must be a Reflection trace");
    trace.validate();
    SpectrumTrace out = trace;
    out.kind = TraceKind::InversePower;
    for (double &v : out.values)
    {
        if (v == 0.0)
            throw DomainError("inverse_response: zero reflection sample");
        require(v > 0.0, "inverse_response: reflection magnitudes must be positive");
        v = 1.0 / (v * v);
    }
    return out;
}

std::vector<Peak> find_peaks(const SpectrumTrace &trace)
{
    const auto &x = trace.freqs_hz;
    const auto &y = trace.values;
    std::vector<Peak> peaks;
    const std::size_t n = y.size();
    std::size_t i = 1;
    while (i + 1 < n)
    {
        if (y[i] > y[i - 1])
        {
            // Walk across a plateau; the peak keeps its first sample.
            std::size_t j = i;
            while (j + 1 < n && y[j + 1] == y[i])
                ++j;
            if (j + 1 < n && y[j + 1] < y[i])
            {
                Peak p{x[i], y[i], i};
                if (j == i)
                {
                    const double ym = y[i - 1], y0 = y[i], yp = y[i + 1];
                    const double denom = ym - 2.0 * y0 + yp;
                    const double h = x[i + 1] - x[i];
                    const double hm = x[i] - x[i - 1];
                    if (denom < 0.0 && std::abs(h - hm) <= 1e-9 * h)
                    {
                        const double shift = 0.5 * (ym - yp) / denom;
                        p.freq_hz = x[i] + shift * h;
                        p.value = y0 - 0.25 * (ym - yp) * shift;
                    }
                }
                peaks.push_back(p);
            }
            i = j + 1;
        }
        else
        {
            ++i;
        }
    }
    return peaks;
}

std::optional<PeakSplitting> peak_splitting(const SpectrumTrace &inverse, double centre_hz)
{
    const auto peaks = find_peaks(inverse);
    const Peak *lo = nullptr;
    const Peak *hi = nullptr;
    for (const auto &p : peaks)
    {
        if (p.freq_hz < centre_hz && (!lo || p.value > lo->value))
            lo = &p;
        if (p.freq_hz > centre_hz && (!hi || p.value > hi->value))
            hi = &p;
    }
    if (!lo || !hi)
        return std::nullopt;
    // A single broad peak split only by ripple is not a doublet: require a
    // dip between the two maxima.
    double dip = std::min(lo->value, hi->value);
    for (std::size_t k = lo->index; k <= hi->index; ++k)
        dip = std::min(dip, inverse.values[k]);
    if (dip >= 0.999 * std::min(lo->value, hi->value))
        return std::nullopt;
    return PeakSplitting{*lo, *hi, hi->freq_hz - lo->freq_hz};
}

NpsdTerms npsd_terms(double omega, const CavityPair &cav, const MechMode &mech, double G,
                     double delta_drive)
{
    const cplx chi_r = chi_electrical(omega, cav.kappa_plus, delta_drive).value;
    const ComplexResponse chi_m_resp = chi_mechanical(omega, mech.gamma_i, mech.omega_m);
    const cplx chi_m = chi_m_resp.value;
    const cplx d = 1.0 + G * G * chi_m * chi_r;
    const double d2 = std::norm(d);
    const double ke = cav.kappa_e_plus;
    const double ki = cav.kappa_i_plus();

    NpsdTerms t;
    t.coherent = std::norm(1.0 - ke * chi_r / d);
    t.electrical_bath = (cav.n_bath_plus + 1.0) * ke * ki * std::norm(chi_r) / d2;
    t.mechanical_bath =
        (mech.n_bath_m + 1.0) * ke * mech.gamma_i * G * G * std::norm(chi_m) * std::norm(chi_r) / d2;
    if (!std::isfinite(t.total()))
        throw SingularityError("npsd_sii: non-finite spectral density");
    return t;
}

double npsd_sii(double omega, const CavityPair &cav, const MechMode &mech, double G, double delta_drive)
{
    return npsd_terms(omega, cav, mech, G, delta_drive).total();
}

SpectrumTrace npsd_trace(std::span<const double> freqs_hz, const CavityPair &cav,
                         const MechMode &mech, double G, double delta_drive)
{
    SpectrumTrace t;
    t.kind = TraceKind::NPSD;
    t.freqs_hz.assign(freqs_hz.begin(), freqs_hz.end());
    t.values.reserve(freqs_hz.size());
    // Probe detuning delta maps to rotating-frame frequency delta + Delta.
    for (double f : freqs_hz)
        t.values.push_back(npsd_sii(hz_to_rad(f) + delta_drive, cav, mech, G, delta_drive));
    t.meta.drive_detuning_hz = rad_to_hz(delta_drive);
    return t;
}

double occupancy_steady(const CavityPair &cav, const MechMode &mech, double G)
{
    require(cav.kappa_plus > 0.0, "occupancy_steady: kappa_plus must be positive");
    const double k = cav.kappa_plus;
    const double gi = mech.gamma_i;
    const double g2 = 4.0 * G * G;
    const double denom = g2 + k * gi;
    if (denom == 0.0)
        return mech.n_bath_m;
    return mech.n_bath_m * (gi / k) * (g2 + k * k) / denom + cav.n_bath_plus * g2 / denom;
}

double backaction_rate(double G, double kappa_plus)
{
    require(kappa_plus > 0.0, "backaction_rate: kappa_plus must be positive");
    return 4.0 * G * G / kappa_plus;
}

double cooperativity(double G, double kappa_plus, double gamma_i)
{
    require(gamma_i > 0.0, "cooperativity: gamma_i must be positive");
    return backaction_rate(G, kappa_plus) / gamma_i;
}

bool is_uniform_grid(std::span<const double> freqs, double rel_tol)
{
    if (freqs.size() < 3)
        return true;
    const double step = (freqs.back() - freqs.front()) / static_cast<double>(freqs.size() - 1);
    for (std::size_t i = 1; i < freqs.size(); ++i)
        if (std::abs((freqs[i] - freqs[i - 1]) - step) > rel_tol * std::abs(step))
            return false;
    return true;
}

SpectrumTrace resample_uniform(const SpectrumTrace &trace, std::size_t points)
{
    trace.validate();
    SpectrumTrace out = trace;
    out.freqs_hz = linear_grid(trace.freqs_hz.front(), trace.freqs_hz.back(), points);
    out.values.resize(points);
    std::size_t j = 0;
    for (std::size_t i = 0; i < points; ++i)
    {
        const double f = out.freqs_hz[i];
        while (j + 2 < trace.size() && trace.freqs_hz[j + 1] < f)
            ++j;
        const double x0 = trace.freqs_hz[j], x1 = trace.freqs_hz[j + 1];
        const double t = std::clamp((f - x0) / (x1 - x0), 0.0, 1.0);
        out.values[i] = trace.values[j] + t * (trace.values[j + 1] - trace.values[j]);
    }
    return out;
}

SpectrumTrace jitter_convolve(const SpectrumTrace &trace, const JitterKernel &kernel)
{
    trace.validate();
    if (!is_uniform_grid(trace.freqs_hz))
        throw DomainError("jitter_convolve: grid is not uniform; resample first");
    if (kernel.fwhm_hz == 0.0)
        return trace;
    const double span = trace.freqs_hz.back() - trace.freqs_hz.front();
    require(kernel.fwhm_hz < span / 4.0, "jitter_convolve: kernel fwhm must be below span/4");

    const double step = span / static_cast<double>(trace.size() - 1);
    const auto w = kernel.sample(step, span);
    const auto half = static_cast<std::ptrdiff_t>(w.size() / 2);
    const auto n = static_cast<std::ptrdiff_t>(trace.size());

    SpectrumTrace out = trace;
    for (std::ptrdiff_t i = 0; i < n; ++i)
    {
        double acc = 0.0;
        for (std::ptrdiff_t k = -half; k <= half; ++k)
        {
            // Edge samples extend the trace as constants.
            const std::ptrdiff_t j = std::clamp<std::ptrdiff_t>(i - k, 0, n - 1);
            acc += w[static_cast<std::size_t>(k + half)] * trace.values[static_cast<std::size_t>(j)];
        }
        out.values[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

JitterDecomposition jitter_decompose(double area_bb, double area_nb, double area_delta, double gamma_m)
{
    require(area_delta > 0.0, "jitter_decompose: area_delta must be positive");
    require(area_bb >= 0.0 && area_nb >= 0.0, "jitter_decompose: areas must be non-negative");
    JitterDecomposition d;
    d.ratio = 1.0 + (area_bb / area_delta) * (1.0 - area_nb / area_delta);
    d.gamma_broadened = d.ratio * gamma_m;
    d.unphysical = area_nb > area_delta;
    return d;
}

LinewidthBudget linewidth_budget(double total_linewidth, const JitterDecomposition &d, double gamma_m)
{
    require(total_linewidth > 0.0, "linewidth_budget: total linewidth must be positive");
    LinewidthBudget b;
    b.coherent_share = gamma_m / total_linewidth;
    b.fast_share = (d.gamma_broadened - gamma_m) / total_linewidth;
    b.slow_share = 1.0 - b.coherent_share - b.fast_share;
    return b;
}

double trapezoid_area(std::span<const double> x, std::span<const double> y)
{
    require(x.size() == y.size(), "trapezoid_area: size mismatch");
    double a = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i)
        a += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
    return a;
}

double peak_fwhm(std::span<const double> x, std::span<const double> y)
{
    require(x.size() == y.size() && x.size() >= 3, "peak_fwhm: need at least three samples");
    const auto it = std::max_element(y.begin(), y.end());
    const auto ip = static_cast<std::size_t>(it - y.begin());
    const double half = *it / 2.0;
    std::size_t l = ip;
    while (l > 0 && y[l] > half)
        --l;
    std::size_t r = ip;
    while (r + 1 < y.size() && y[r] > half)
        ++r;
    require(y[l] <= half && y[r] <= half, "peak_fwhm: peak not contained in the window");
    const double xl = x[l] + (half - y[l]) * (x[l + 1] - x[l]) / (y[l + 1] - y[l]);
    const double xr = x[r - 1] + (y[r - 1] - half) * (x[r] - x[r - 1]) / (y[r - 1] - y[r]);
    return xr - xl;
}

} // namespace emx
