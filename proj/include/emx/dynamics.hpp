#ifndef EMX_DYNAMICS_HPP
#define EMX_DYNAMICS_HPP

#include <span>
#include <stdexcept>
#include <vector>

namespace emx
{

enum class RingdownSegment
{
    CavityLeak,
    MechanicalDecay,
};

// Detected power proportional to phonon number (energy, not amplitude).
struct RingdownTrace
{
    std::vector<double> times;  // s
    std::vector<double> power;  // quanta-proportional
    std::vector<RingdownSegment> segments; // empty or one label per sample

    std::size_t size() const { return times.size(); }
    void validate() const;
};

// A_cav exp(-kappa t) + A_mech exp(-gamma_m t).
double ringdown_signal(double t, double a_cav, double kappa_plus, double a_mech, double gamma_m);

RingdownTrace ringdown_trace(std::span<const double> times, double a_cav, double kappa_plus,
                             double a_mech, double gamma_m);

double total_damping(double gamma_i, double gamma_em);

struct HeatingParams
{
    double gamma_i = 0.0;   // rad/s
    double gamma_em = 0.0;  // rad/s
    double gamma_p = 0.0;   // hot-bath coupling (rad/s)
    double n_bath_m = 0.0;  // ambient bath
    double n_p = 0.0;       // pump-induced hot-bath occupancy
    double delta_b = 0.0;   // slowly turning-on fraction of the hot bath, 0..1
    double gamma_s = 0.0;   // turn-on rate (rad/s)

    double gamma_total() const { return gamma_i + gamma_em + gamma_p; }
    double n_hot() const;
    void validate() const;
};

inline constexpr double kHeatingDegeneracyTol = 1e-9;

double heating_closed_form(double t, const HeatingParams &p);

class IntegrationError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Independent check of heating_closed_form: adaptive Dormand-Prince
// integration of the rate equation from n_m(0) = n_bath_m.
std::vector<double> heating_ode_oracle(std::span<const double> t_grid, const HeatingParams &p);

} // namespace emx

#endif // EMX_DYNAMICS_HPP
