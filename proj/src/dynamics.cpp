#include "emx/dynamics.hpp"

#include "emx/model_core.hpp"

#include <boost/numeric/odeint.hpp>

#include <cmath>

namespace emx
{
namespace
{
void require(bool cond, const char *what)
{
    if (!cond)
        throw DomainError(what);
}
} // namespace

void RingdownTrace::validate() const
{
    require(times.size() == power.size(), "RingdownTrace: times and power differ in length");
    require(segments.empty() || segments.size() == times.size(), "RingdownTrace: segment labels mismatch");
    for (std::size_t i = 1; i < times.size(); ++i)
        require(times[i] > times[i - 1], "RingdownTrace: times not strictly increasing");
}

double ringdown_signal(double t, double a_cav, double kappa_plus, double a_mech, double gamma_m)
{
    return a_cav * std::exp(-kappa_plus * t) + a_mech * std::exp(-gamma_m * t);
}

RingdownTrace ringdown_trace(std::span<const double> times, double a_cav, double kappa_plus,
                             double a_mech, double gamma_m)
{
    require(kappa_plus > 0.0 && gamma_m > 0.0, "ringdown_trace: rates must be positive");
    require(a_cav >= 0.0 && a_mech >= 0.0, "ringdown_trace: amplitudes must be non-negative");
    RingdownTrace tr;
    tr.times.assign(times.begin(), times.end());
    tr.power.reserve(times.size());
    tr.segments.reserve(times.size());
    for (double t : times)
    {
        tr.power.push_back(ringdown_signal(t, a_cav, kappa_plus, a_mech, gamma_m));
        const bool leak = a_cav * std::exp(-kappa_plus * t) > a_mech * std::exp(-gamma_m * t);
        tr.segments.push_back(leak ? RingdownSegment::CavityLeak : RingdownSegment::MechanicalDecay);
    }
    return tr;
}

double total_damping(double gamma_i, double gamma_em) { return gamma_i + gamma_em; }

double HeatingParams::n_hot() const { return (gamma_p * n_p + gamma_i * n_bath_m) / gamma_total(); }

void HeatingParams::validate() const
{
    require(gamma_i >= 0.0 && gamma_em >= 0.0 && gamma_p >= 0.0 && gamma_s >= 0.0,
            "HeatingParams: rates must be non-negative");
    require(n_bath_m >= 0.0 && n_p >= 0.0, "HeatingParams: occupancies must be non-negative");
    require(delta_b >= 0.0 && delta_b <= 1.0, "HeatingParams: delta_b must lie in [0, 1]");
    require(gamma_total() > 0.0, "HeatingParams: total damping must be positive");
}

double heating_closed_form(double t, const HeatingParams &p)
{
    p.validate();
    const double g = p.gamma_total();
    const double decay = std::exp(-g * t);
    double n = p.n_bath_m * decay - p.n_hot() * std::expm1(-g * t);

    const double drive = p.gamma_p * p.n_p * p.delta_b;
    if (drive == 0.0)
        return n;
    if (std::abs(p.gamma_s - g) <= kHeatingDegeneracyTol * g)
    {
        // Removable singularity of n_delta (e^{-gs t} - e^{-g t}) at gs = g.
        n -= drive * t * decay;
    }
    else
    {
        const double n_delta = drive / (p.gamma_s - g);
        const double gap = std::abs(g - p.gamma_s) * t;
        // e^{-gs t} - e^{-g t}, factored so the expm1 argument is never positive.
        const double diff = p.gamma_s < g ? -std::exp(-p.gamma_s * t) * std::expm1(-gap)
                                          : decay * std::expm1(-gap);
        n += n_delta * diff;
    }
    return n;
}

std::vector<double> heating_ode_oracle(std::span<const double> t_grid, const HeatingParams &p)
{
    namespace odeint = boost::numeric::odeint;
    p.validate();
    require(!t_grid.empty(), "heating_ode_oracle: empty time grid");
    require(t_grid.front() == 0.0, "heating_ode_oracle: time grid must start at zero");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        require(t_grid[i] > t_grid[i - 1], "heating_ode_oracle: time grid must be increasing");

    const double g = p.gamma_total();
    auto rhs = [&](const double &n, double &dndt, double t) {
        dndt = -g * n + p.gamma_p * p.n_p * (1.0 - p.delta_b * std::exp(-p.gamma_s * t)) +
               p.gamma_i * p.n_bath_m;
    };

    std::vector<double> out;
    out.reserve(t_grid.size());
    double state = p.n_bath_m;
    auto stepper = odeint::make_dense_output(1e-12, 1e-9, odeint::runge_kutta_dopri5<double>());
    const double dt0 = t_grid.size() > 1 ? (t_grid[1] - t_grid[0]) / 10.0 : 1e-3 / g;
    try
    {
        odeint::integrate_times(stepper, rhs, state, t_grid.begin(), t_grid.end(),
                                std::min(dt0, 0.1 / g),
                                [&](const double &n, double) { out.push_back(n); });
    }
    catch (const odeint::step_adjustment_error &e)
    {
        throw IntegrationError(std::string("heating_ode_oracle: ") + e.what());
    }
    catch (const odeint::no_progress_error &e)
    {
        throw IntegrationError(std::string("heating_ode_oracle: ") + e.what());
    }
    if (out.size() != t_grid.size())
        throw IntegrationError("heating_ode_oracle: integration stopped early");
    return out;
}

} // namespace emx
