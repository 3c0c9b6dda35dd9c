#ifndef EMX_MODEL_CORE_HPP
#define EMX_MODEL_CORE_HPP

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace emx
{

// All internal frequencies and rates are angular (rad/s). Files and the CLI
// use ordinary frequency in Hz; convert at the boundary with these helpers.
namespace constants
{
inline constexpr double kHbar = 1.054571817e-34;     // J s
inline constexpr double kBoltzmann = 1.380649e-23;   // J/K
inline constexpr double kMu0 = 1.25663706212e-6;     // H/m
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
} // namespace constants

constexpr double hz_to_rad(double hz) { return constants::kTwoPi * hz; }
constexpr double rad_to_hz(double rad) { return rad / constants::kTwoPi; }

// Bose-Einstein occupancy of a mode at angular frequency omega and temperature T.
double bose_occupancy(double omega, double temperature_k);

// Thrown when an operation is called outside its preconditions.
class DomainError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

// Thrown when a response function hits an exact pole.
class SingularityError : public std::domain_error
{
public:
    using std::domain_error::domain_error;
};

// Even/odd supermodes of two tunnel-coupled LC resonators.
struct CavityPair
{
    double omega_r0 = 0.0;      // bare LC frequency (rad/s)
    double J = 0.0;             // tunnel coupling (rad/s)
    double kappa_plus = 0.0;    // total decay of the even supermode (rad/s)
    double kappa_minus = 0.0;   // total decay of the odd supermode (rad/s)
    double kappa_e_plus = 0.0;  // external coupling of the even supermode (rad/s)
    double kappa_e_minus = 0.0; // external coupling of the odd supermode (rad/s)
    double n_bath_plus = 0.0;   // electrical bath occupancy of the even mode

    double omega_plus() const { return omega_r0 + J; }
    double omega_minus() const { return omega_r0 - J; }
    double kappa_i_plus() const { return kappa_plus - kappa_e_plus; }
    double kappa_i_minus() const { return kappa_minus - kappa_e_minus; }

    // Throws DomainError if any invariant is violated.
    void validate() const;
};

struct MechMode
{
    double omega_m = 0.0;  // rad/s
    double gamma_i = 0.0;  // intrinsic energy decay (rad/s)
    double n_bath_m = 0.0; // thermal bath occupancy

    bool sideband_resolved(const CavityPair &cav) const { return omega_m > cav.kappa_plus; }
    double quality_factor() const { return omega_m / gamma_i; }
    void validate() const;
};

// Pump tone. Attenuation is a negative dB number: P_d = P_in + attenuation.
struct DriveConfig
{
    double power_in_dbm = -200.0;
    double attenuation_db = 0.0;
    double omega_d = 0.0; // rad/s
    double g0_pm = 0.0;   // cross-mode single-photon coupling g_{0,+-} (rad/s)

    double power_at_cavity_w() const;
    double delta_plus(const CavityPair &cav) const { return cav.omega_plus() - omega_d; }
    double delta_minus(const CavityPair &cav) const { return cav.omega_minus() - omega_d; }
};

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);

enum class ResponseUnit
{
    Dimensionless,
    Seconds,
};

// Complex-valued response tagged with its unit. Flags mark results computed
// under a substituted floor or outside the sideband-resolved regime.
struct ComplexResponse
{
    enum Flag : unsigned
    {
        kNone = 0,
        kDampingFloored = 1u << 0,
        kUnresolvedSidebands = 1u << 1,
    };

    std::complex<double> value;
    ResponseUnit unit = ResponseUnit::Dimensionless;
    unsigned flags = kNone;

    double re() const { return value.real(); }
    double im() const { return value.imag(); }
    double magnitude() const { return std::abs(value); }
    bool has(Flag f) const { return (flags & f) != 0; }
};

struct SupermodePair
{
    double omega_plus = 0.0;
    double omega_minus = 0.0;
};

SupermodePair supermode_frequencies(double omega_r0, double J);

// 1 / (kappa/2 + i (Delta - omega)).
ComplexResponse chi_electrical(double omega, double kappa, double delta);

inline constexpr double kDefaultGammaFloor = 1e-6; // rad/s

// 1 / (gamma_i/2 + i (omega_m - omega)). A zero gamma_i is replaced by
// gamma_floor and the result is flagged kDampingFloored.
ComplexResponse chi_mechanical(double omega, double gamma_i, double omega_m,
                               double gamma_floor = kDefaultGammaFloor);

// Intra-cavity drive photons in the odd supermode.
double intracavity_photons(const DriveConfig &drive, const CavityPair &cav);

// Power at the cavity input (W) that yields n_d photons; inverse of the above.
double power_for_photons(double n_d, double omega_d, const CavityPair &cav);

// G = g_{0,+-} sqrt(n_d).
double enhanced_coupling(double g0_pm, double n_d);

} // namespace emx

#endif // EMX_MODEL_CORE_HPP
