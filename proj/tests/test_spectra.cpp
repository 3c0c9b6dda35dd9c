#include <doctest.h>

#include "emx/spectra.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

using namespace emx;
using cplx = std::complex<double>;

namespace
{
CavityPair even_mode(double kappa_hz = 230e3, double kappa_e_hz = 85.3e3)
{
    CavityPair c;
    c.omega_r0 = hz_to_rad(10.77e9);
    c.J = hz_to_rad(207.5e6);
    c.kappa_plus = hz_to_rad(kappa_hz);
    c.kappa_e_plus = hz_to_rad(kappa_e_hz);
    c.kappa_minus = hz_to_rad(8.9e6);
    c.kappa_e_minus = hz_to_rad(8.9e6);
    return c;
}

MechMode mech_mode(double gamma_hz = 68.0, double n_bath = 0.0)
{
    return {hz_to_rad(424.7e6), hz_to_rad(gamma_hz), n_bath};
}

// Direct transcription of the reflection formula, used as an oracle.
cplx s11_direct(double d, double k, double ke, double gi, double G, double offset)
{
    const cplx i(0.0, 1.0);
    return 1.0 - ke / (k / 2.0 + i * d + 2.0 * G * G / (gi + 2.0 * i * (d - offset)));
}

cplx integrate_complex(auto f, double a, double b)
{
    using boost::math::quadrature::gauss_kronrod;
    const double re = gauss_kronrod<double, 61>::integrate([&](double x) { return f(x).real(); }, a, b, 25, 1e-13);
    const double im = gauss_kronrod<double, 61>::integrate([&](double x) { return f(x).imag(); }, a, b, 25, 1e-13);
    return {re, im};
}

std::vector<double> lorentzian(const std::vector<double> &x, double centre, double fwhm)
{
    std::vector<double> y;
    for (double v : x)
    {
        const double u = (v - centre) / (fwhm / 2.0);
        y.push_back(1.0 / (1.0 + u * u));
    }
    return y;
}

SpectrumTrace make_trace(std::vector<double> x, std::vector<double> y, TraceKind kind = TraceKind::NPSD)
{
    SpectrumTrace t;
    t.freqs_hz = std::move(x);
    t.values = std::move(y);
    t.kind = kind;
    return t;
}
} // namespace

TEST_CASE("zero coupling reduces to the bare cavity Lorentzian")
{
    const CavityPair cav = even_mode(230e3, 85e3);
    const MechMode m = mech_mode();
    const auto s0 = s11_eit(0.0, cav, m, 0.0, m.omega_m);
    CHECK(s0.re() == doctest::Approx(1.0 - 2.0 * 85.0 / 230.0).epsilon(1e-12));
    CHECK(s0.re() == doctest::Approx(0.261).epsilon(2e-3));
    CHECK(std::abs(s0.im()) < 1e-15);

    const cplx i(0.0, 1.0);
    for (double d_hz : {-1e6, -1e5, -3e3, 0.0, 17.0, 4e4, 2e6})
    {
        const double d = hz_to_rad(d_hz);
        for (double delta_hz : {0.0, 424.7e6, -1e6})
        {
            const cplx bare = 1.0 - cav.kappa_e_plus / (cav.kappa_plus / 2.0 + i * d);
            const cplx s = s11_eit(d, cav, m, 0.0, hz_to_rad(delta_hz)).value;
            CHECK(std::abs(s - bare) <= 1e-15 * std::abs(bare) + 1e-16);
        }
    }
    CHECK(std::abs(s11_eit(hz_to_rad(1e12), cav, m, 0.0, 0.0).value - 1.0) < 1e-6);
    CHECK(std::abs(s11_eit(hz_to_rad(1e12), cav, m, hz_to_rad(8.4e3), m.omega_m).value - 1.0) < 1e-6);
}

TEST_CASE("transparency peak height at two-photon resonance")
{
    const CavityPair cav = even_mode();
    const MechMode m = mech_mode(68.0);
    const double C = 28.5;
    const double G = std::sqrt(C * cav.kappa_plus * m.gamma_i / 4.0);
    CHECK(cooperativity(G, cav.kappa_plus, m.gamma_i) == doctest::Approx(C));
    const auto s = s11_eit(0.0, cav, m, G, m.omega_m);
    const double expected = 1.0 - cav.kappa_e_plus / ((cav.kappa_plus / 2.0) * (1.0 + C));
    CHECK(s.re() == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(s.im()) < 1e-12);
}

TEST_CASE("reflection never exceeds unity for undercoupled cavities")
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial)
    {
        const double k = 50e3 + 500e3 * u(rng);
        const CavityPair cav = even_mode(k, 0.5 * k * u(rng));
        const MechMode m = mech_mode(10.0 + 500.0 * u(rng));
        const double G = hz_to_rad(30e3 * u(rng));
        const double delta = m.omega_m + hz_to_rad(20e3 * (u(rng) - 0.5));
        const auto grid = linear_grid(-3e5, 3e5, 4001);
        const auto tr = reflection_trace(grid, cav, m, G, delta, {JitterShape::Gaussian, 3e3 * u(rng)});
        for (double v : tr.values)
            CHECK(v <= 1.0 + 1e-12);
    }
}

TEST_CASE("Lorentzian jitter equals brute-force averaging over the mechanical offset")
{
    const CavityPair cav = even_mode();
    const MechMode m = mech_mode();
    const double G = hz_to_rad(8.4e3);
    const double fwhm = 1.98e3;
    const double hw = hz_to_rad(fwhm) / 2.0;
    for (double d_hz : {-9e3, -2e3, 0.0, 350.0, 8.4e3, 5e4})
    {
        const double d = hz_to_rad(d_hz);
        // eps = hw tan(theta) maps the Cauchy density onto the uniform one.
        const cplx avg = integrate_complex(
                             [&](double th) {
                                 return s11_direct(d, cav.kappa_plus, cav.kappa_e_plus, m.gamma_i, G,
                                                   hw * std::tan(th));
                             },
                             -std::numbers::pi / 2.0, std::numbers::pi / 2.0) /
                         std::numbers::pi;
        const cplx got = s11_eit_jittered(d, cav, m, G, m.omega_m, {JitterShape::Lorentzian, fwhm}).value;
        CHECK(std::abs(got - avg) < 1e-7);
    }
}

TEST_CASE("Gaussian jitter quadrature matches an adaptive oracle")
{
    const CavityPair cav = even_mode();
    for (double gamma_hz : {68.0, 1.0})
    {
        const MechMode m = mech_mode(gamma_hz);
        for (double G_hz : {2e3, 8.4e3})
        {
            const double G = hz_to_rad(G_hz);
            for (double fwhm : {300.0, 1.98e3, 6e3})
            {
                const double sigma = hz_to_rad(fwhm) / (2.0 * std::sqrt(2.0 * std::log(2.0)));
                for (double d_hz : {-G_hz, -700.0, 0.0, 0.5 * G_hz, 3e4})
                {
                    const double d = hz_to_rad(d_hz);
                    auto f = [&](double e) {
                        const double w = std::exp(-0.5 * e * e / (sigma * sigma)) / (sigma * std::sqrt(2.0 * std::numbers::pi));
                        return w * s11_direct(d, cav.kappa_plus, cav.kappa_e_plus, m.gamma_i, G, e);
                    };
                    // Split at the integrand's sharp feature near eps = d.
                    const double a = -10.0 * sigma, b = 10.0 * sigma;
                    const double mid = std::clamp(d, a + 1.0, b - 1.0);
                    const cplx oracle = integrate_complex(f, a, mid) + integrate_complex(f, mid, b);
                    const cplx got = s11_eit_jittered(d, cav, m, G, m.omega_m, {JitterShape::Gaussian, fwhm}).value;
                    CHECK(std::abs(got - oracle) < 1e-6);
                }
            }
        }
    }
}

TEST_CASE("jitter with zero width is the bare model")
{
    const CavityPair cav = even_mode();
    const MechMode m = mech_mode();
    const double G = hz_to_rad(8.4e3);
    for (auto shape : {JitterShape::Gaussian, JitterShape::Lorentzian})
        CHECK(s11_eit_jittered(1234.0, cav, m, G, m.omega_m, {shape, 0.0}).value ==
              s11_eit(1234.0, cav, m, G, m.omega_m).value);
    CHECK_THROWS_AS(s11_eit_jittered(0.0, cav, m, G, m.omega_m, {JitterShape::Gaussian, -1.0}), DomainError);
}

TEST_CASE("inverse response peaks are separated by 2G")
{
    const CavityPair cav = even_mode();
    const MechMode m = mech_mode();
    SUBCASE("G = 8.4 kHz on the standard sweep grid")
    {
        const auto grid = linear_grid(-300e3, 300e3, 1201);
        const double step = grid[1] - grid[0];
        const auto inv = inverse_response(reflection_trace(grid, cav, m, hz_to_rad(8.4e3), m.omega_m));
        const auto split = peak_splitting(inv, 0.0);
        REQUIRE(split.has_value());
        CHECK(std::abs(split->separation_hz - 16.8e3) <= step);
    }
    SUBCASE("sweep over G")
    {
        const double step = 5.0;
        double prev_err = 1e9;
        for (double G_hz = 2e3; G_hz <= 60e3; G_hz += 2e3)
        {
            const auto grid = linear_grid(-3.0 * G_hz, 3.0 * G_hz, static_cast<std::size_t>(6.0 * G_hz / step) + 1);
            const auto inv = inverse_response(reflection_trace(grid, cav, m, hz_to_rad(G_hz), m.omega_m));
            const auto split = peak_splitting(inv, 0.0);
            REQUIRE(split.has_value());
            const double err = std::abs(split->separation_hz / (2.0 * G_hz) - 1.0);
            // Intrinsic damping pushes the maxima outward; the bias falls off roughly as 1/G^2.
            CHECK(err <= prev_err + step / (2.0 * G_hz));
            prev_err = err;
            if (hz_to_rad(2.0 * G_hz) > cav.kappa_plus / 4.0)
                CHECK(err < 0.02);
        }
    }
    SUBCASE("no coupling gives a single peak")
    {
        const auto grid = linear_grid(-3e5, 3e5, 2001);
        const auto inv = inverse_response(reflection_trace(grid, cav, m, 0.0, m.omega_m));
        CHECK(find_peaks(inv).size() == 1);
        CHECK_FALSE(peak_splitting(inv, 0.0).has_value());
    }
}

TEST_CASE("inverse response guards")
{
    auto t = make_trace({0.0, 1.0, 2.0}, {0.5, 0.0, 0.5}, TraceKind::Reflection);
    CHECK_THROWS_AS(inverse_response(t), DomainError);
    t.values = {0.5, 0.25, 0.5};
    const auto inv = inverse_response(t);
    CHECK(inv.kind == TraceKind::InversePower);
    CHECK(inv.values[1] == doctest::Approx(16.0));
    t.kind = TraceKind::NPSD;
    CHECK_THROWS_AS(inverse_response(t), DomainError);
}

TEST_CASE("trace validation")
{
    CHECK_THROWS_AS(make_trace({0.0, 0.0}, {1.0, 1.0}).validate(), DomainError);
    CHECK_THROWS_AS(make_trace({0.0}, {1.0}).validate(), DomainError);
    CHECK_THROWS_AS(make_trace({0.0, 1.0}, {1.0, std::nan("")}).validate(), DomainError);
    CHECK_THROWS_AS(make_trace({0.0, 1.0}, {1.0}).validate(), DomainError);
    CHECK_NOTHROW(make_trace({0.0, 1.0}, {1.0, 2.0}).validate());
}

TEST_CASE("peak finding")
{
    SUBCASE("plateau resolves to its lowest-frequency sample")
    {
        const auto t = make_trace({0, 1, 2, 3, 4, 5, 6}, {0, 1, 2, 2, 2, 1, 0});
        const auto p = find_peaks(t);
        REQUIRE(p.size() == 1);
        CHECK(p[0].index == 2);
        CHECK(p[0].freq_hz == 2.0);
    }
    SUBCASE("parabolic refinement is exact on a parabola")
    {
        std::vector<double> x, y;
        for (int i = 0; i <= 10; ++i)
        {
            x.push_back(i * 0.5);
            y.push_back(3.0 - (x.back() - 2.13) * (x.back() - 2.13));
        }
        const auto p = find_peaks(make_trace(x, y));
        REQUIRE(p.size() == 1);
        CHECK(p[0].freq_hz == doctest::Approx(2.13).epsilon(1e-12));
        CHECK(p[0].value == doctest::Approx(3.0).epsilon(1e-12));
    }
    SUBCASE("monotone trace has no peaks")
    {
        CHECK(find_peaks(make_trace({0, 1, 2, 3}, {1, 2, 3, 4})).empty());
    }
}

TEST_CASE("NPSD vacuum floor and term structure")
{
    const CavityPair cav = even_mode();
    const MechMode cold = mech_mode(68.0, 0.0);
    for (double f : {-1e6, -3e4, 0.0, 5e3, 2e5})
    {
        const double w = hz_to_rad(f) + cold.omega_m;
        const auto t0 = npsd_terms(w, cav, cold, 0.0, cold.omega_m);
        CHECK(t0.mechanical_bath == 0.0);
        CHECK(t0.total() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(npsd_terms(w, cav, mech_mode(68.0, 7.0), 0.0, cold.omega_m).mechanical_bath == 0.0);
    }
    const double far = cold.omega_m + hz_to_rad(50e6);
    CHECK(npsd_sii(far, cav, mech_mode(68.0, 0.0), hz_to_rad(8.4e3), cold.omega_m) ==
          doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("mechanical NPSD area scales with bath occupancy and back-action rate")
{
    const CavityPair cav = even_mode();
    const double G = hz_to_rad(1.5e3);
    auto area = [&](double n_bath, double G_) {
        const MechMode m = mech_mode(68.0, n_bath);
        const double gm = m.gamma_i + backaction_rate(G_, cav.kappa_plus);
        const std::size_t n = 40001;
        const double half = 400.0 * gm;
        const double h = 2.0 * half / static_cast<double>(n - 1);
        double a = 0.0;
        for (std::size_t k = 0; k < n; ++k)
        {
            const double w = m.omega_m - half + h * static_cast<double>(k);
            const double wt = (k == 0 || k + 1 == n) ? 0.5 : 1.0;
            a += wt * h * npsd_terms(w, cav, m, G_, m.omega_m).mechanical_bath;
        }
        return a;
    };
    const double a1 = area(1.0, G);
    for (double nb : {0.0, 2.0, 5.0, 30.0})
        CHECK(area(nb, G) / a1 == doctest::Approx((nb + 1.0) / 2.0).epsilon(1e-9));

    for (double G_hz : {0.5e3, 1.5e3, 3e3})
    {
        const double g = hz_to_rad(G_hz);
        const double nb = 3.0;
        const MechMode m = mech_mode(68.0, nb);
        const double gem = backaction_rate(g, cav.kappa_plus);
        const double flux = (cav.kappa_e_plus / cav.kappa_plus) * gem * (nb + 1.0) * m.gamma_i / (m.gamma_i + gem);
        CHECK(area(nb, g) / (2.0 * std::numbers::pi) == doctest::Approx(flux).epsilon(0.02));
    }
}

TEST_CASE("steady-state occupancy limits and monotonicity")
{
    CavityPair cav = even_mode();
    MechMode m = mech_mode(68.0, 1.5);
    CHECK(occupancy_steady(cav, m, 0.0) == doctest::Approx(1.5));
    const double huge = hz_to_rad(1e8);
    CHECK(occupancy_steady(cav, m, huge) == doctest::Approx(1.5 * m.gamma_i / cav.kappa_plus).epsilon(1e-6));
    cav.n_bath_plus = 0.2;
    CHECK(occupancy_steady(cav, m, huge) == doctest::Approx(1.5 * m.gamma_i / cav.kappa_plus + 0.2).epsilon(1e-6));

    for (double nr : {0.0, 0.5, 3.0})
    {
        cav.n_bath_plus = nr;
        double prev = occupancy_steady(cav, m, 0.0);
        for (double G_hz = 500.0; G_hz <= 50e3; G_hz *= 1.5)
        {
            const double n = occupancy_steady(cav, m, hz_to_rad(G_hz));
            if (nr < m.n_bath_m)
                CHECK(n < prev);
            else
                CHECK(n > prev);
            prev = n;
        }
    }

    cav.n_bath_plus = 0.0;
    cav.kappa_plus = 0.0;
    CHECK_THROWS_AS(occupancy_steady(cav, m, 1.0), DomainError);
}

TEST_CASE("back-action cooling from a 500 mK bath")
{
    const CavityPair cav = even_mode();
    MechMode m = mech_mode(68.0);
    m.n_bath_m = bose_occupancy(m.omega_m, 0.5);
    CHECK(m.n_bath_m == doctest::Approx(24.05).epsilon(0.01));
    const double g0 = hz_to_rad(17.3);
    double prev = m.n_bath_m;
    for (double nd : {1e3, 1e4, 7.1e4, 2.357e5, 4.3e5})
    {
        const double n = occupancy_steady(cav, m, enhanced_coupling(g0, nd));
        CHECK(n < prev);
        prev = n;
    }
    CHECK(prev == doctest::Approx(m.n_bath_m / (1.0 + 32.9)).epsilon(0.02));
}

TEST_CASE("back-action rate and cooperativity")
{
    const double k = hz_to_rad(230e3);
    CHECK(rad_to_hz(backaction_rate(hz_to_rad(11.3e3), k)) == doctest::Approx(2.22e3).epsilon(2e-3));
    CHECK(backaction_rate(0.0, k) == 0.0);
    const double G = enhanced_coupling(hz_to_rad(17.3), 4.3e5);
    CHECK(cooperativity(G, k, hz_to_rad(68.0)) == doctest::Approx(33.0).epsilon(0.01));
    CHECK_THROWS_AS(backaction_rate(1.0, 0.0), DomainError);
    CHECK_THROWS_AS(cooperativity(1.0, k, 0.0), DomainError);
}

TEST_CASE("jitter kernel sampling is normalised")
{
    for (auto shape : {JitterShape::Gaussian, JitterShape::Lorentzian})
        for (double fwhm : {0.0, 10.0, 1.98e3, 5e3})
        {
            const auto w = JitterKernel{shape, fwhm}.sample(25.0, 1e5);
            double s = 0.0;
            for (double v : w)
                s += v;
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(w.size() % 2 == 1);
        }
    CHECK(JitterKernel{JitterShape::Gaussian, 0.0}.sample(1.0, 1.0).size() == 1);
    CHECK_THROWS_AS(JitterKernel({JitterShape::Gaussian, -1.0}).sample(1.0, 1.0), DomainError);
}

TEST_CASE("jitter convolution")
{
    const auto x = linear_grid(-100e3, 100e3, 8001);
    SUBCASE("zero width is the identity")
    {
        const auto t = make_trace(x, lorentzian(x, 0.0, 2e3));
        const auto out = jitter_convolve(t, {JitterShape::Gaussian, 0.0});
        CHECK(out.values == t.values);
    }
    SUBCASE("Lorentzian widths add")
    {
        for (auto [a, b] : {std::pair{1e3, 2e3}, std::pair{2e3, 4.7e3}, std::pair{3e3, 0.5e3}})
        {
            const auto t = make_trace(x, lorentzian(x, 0.0, a));
            const auto out = jitter_convolve(t, {JitterShape::Lorentzian, b});
            CHECK(peak_fwhm(out.freqs_hz, out.values) == doctest::Approx(a + b).epsilon(0.01));
        }
        const auto t = make_trace(x, lorentzian(x, 0.0, 2e3));
        const auto out = jitter_convolve(t, {JitterShape::Lorentzian, 4.7e3});
        CHECK(peak_fwhm(out.freqs_hz, out.values) == doctest::Approx(6.7e3).epsilon(0.01));
    }
    SUBCASE("area preserved and width never narrows")
    {
        for (double fwhm : {200.0, 1.98e3, 8e3})
        {
            std::vector<double> y;
            for (double v : x)
                y.push_back(std::exp(-0.5 * v * v / (2e3 * 2e3)));
            const auto t = make_trace(x, y);
            const auto out = jitter_convolve(t, {JitterShape::Gaussian, fwhm});
            const double a0 = trapezoid_area(t.freqs_hz, t.values);
            CHECK(std::abs(trapezoid_area(out.freqs_hz, out.values) / a0 - 1.0) < 1e-4);
            CHECK(peak_fwhm(out.freqs_hz, out.values) >= peak_fwhm(t.freqs_hz, t.values));

            const auto tl = make_trace(x, lorentzian(x, 0.0, 2e3));
            const auto outl = jitter_convolve(tl, {JitterShape::Gaussian, fwhm});
            CHECK(peak_fwhm(outl.freqs_hz, outl.values) >= peak_fwhm(tl.freqs_hz, tl.values));
        }
    }
    SUBCASE("errors")
    {
        auto t = make_trace({0.0, 1.0, 3.0, 4.0}, {0.0, 1.0, 1.0, 0.0});
        CHECK_THROWS_AS(jitter_convolve(t, {JitterShape::Gaussian, 0.1}), DomainError);
        const auto u = resample_uniform(t, 5);
        CHECK(is_uniform_grid(u.freqs_hz));
        CHECK_NOTHROW(jitter_convolve(u, {JitterShape::Gaussian, 0.1}));
        CHECK_THROWS_AS(jitter_convolve(make_trace(x, lorentzian(x, 0.0, 2e3)), {JitterShape::Gaussian, 50e3}),
                        DomainError);
    }
}

TEST_CASE("uniform resampling is exact on linear data")
{
    const auto t = make_trace({0.0, 0.3, 1.0, 2.5, 4.0}, {1.0, 1.6, 3.0, 6.0, 9.0});
    const auto u = resample_uniform(t, 17);
    for (std::size_t i = 0; i < u.size(); ++i)
        CHECK(u.values[i] == doctest::Approx(1.0 + 2.0 * u.freqs_hz[i]));
    CHECK_FALSE(is_uniform_grid(t.freqs_hz));
}

TEST_CASE("jitter decomposition")
{
    const double gm = hz_to_rad(2e3);
    CHECK(jitter_decompose(0.0, 0.3, 1.0, gm).ratio == 1.0);
    CHECK(jitter_decompose(2.5, 1.0, 1.0, gm).ratio == 1.0);
    const auto d = jitter_decompose(1.0, 0.5, 1.0, gm);
    CHECK(d.ratio == doctest::Approx(1.5));
    CHECK(d.gamma_broadened == doctest::Approx(1.5 * gm));
    CHECK_FALSE(d.unphysical);
    const auto bad = jitter_decompose(1.0, 2.0, 1.0, gm);
    CHECK(bad.unphysical);
    CHECK(bad.ratio < 1.0);
    CHECK_THROWS_AS(jitter_decompose(1.0, 0.5, 0.0, gm), DomainError);
    CHECK_THROWS_AS(jitter_decompose(-1.0, 0.5, 1.0, gm), DomainError);

    const auto b = linewidth_budget(hz_to_rad(6.7e3), d, gm);
    CHECK(b.coherent_share + b.fast_share + b.slow_share == doctest::Approx(1.0));
    CHECK(b.fast_share == doctest::Approx(0.5 * 2e3 / 6.7e3));
}

TEST_CASE("trapezoid area and peak width helpers")
{
    const auto x = linear_grid(0.0, 10.0, 11);
    std::vector<double> y;
    for (double v : x)
        y.push_back(3.0 * v + 2.0);
    CHECK(trapezoid_area(x, y) == doctest::Approx(170.0));
    std::vector<double> y2;
    for (double v : x)
        y2.push_back(2.0 * (3.0 * v + 2.0) - 1.0);
    CHECK(trapezoid_area(x, y2) == doctest::Approx(2.0 * 170.0 - 10.0));

    const auto xs = linear_grid(-5.0, 5.0, 1001);
    std::vector<double> tri;
    for (double v : xs)
        tri.push_back(std::max(0.0, 1.0 - std::abs(v) / 2.0));
    CHECK(peak_fwhm(xs, tri) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK_THROWS_AS(peak_fwhm(xs, std::vector<double>(xs.size(), 1.0)), DomainError);
}
