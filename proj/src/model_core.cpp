#include "emx/model_core.hpp"

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

bool finite(double x) { return std::isfinite(x); }
} // namespace

double bose_occupancy(double omega, double temperature_k)
{
    require(omega > 0.0, "bose_occupancy: omega must be positive");
    require(temperature_k >= 0.0, "bose_occupancy: temperature must be non-negative");
    if (temperature_k == 0.0)
        return 0.0;
    const double x = constants::kHbar * omega / (constants::kBoltzmann * temperature_k);
    return 1.0 / std::expm1(x);
}

void CavityPair::validate() const
{
    require(finite(omega_r0) && omega_r0 > 0.0, "CavityPair: omega_r0 must be positive");
    require(finite(J) && J >= 0.0, "CavityPair: J must be non-negative");
    require(J < omega_r0, "CavityPair: J must be smaller than omega_r0");
    require(finite(kappa_plus) && kappa_plus >= 0.0, "CavityPair: kappa_plus must be non-negative");
    require(finite(kappa_minus) && kappa_minus >= 0.0, "CavityPair: kappa_minus must be non-negative");
    require(finite(kappa_e_plus) && kappa_e_plus >= 0.0, "CavityPair: kappa_e_plus must be non-negative");
    require(finite(kappa_e_minus) && kappa_e_minus >= 0.0, "CavityPair: kappa_e_minus must be non-negative");
    require(kappa_e_plus <= kappa_plus, "CavityPair: kappa_e_plus exceeds kappa_plus");
    require(kappa_e_minus <= kappa_minus, "CavityPair: kappa_e_minus exceeds kappa_minus");
    require(finite(n_bath_plus) && n_bath_plus >= 0.0, "CavityPair: n_bath_plus must be non-negative");
}

void MechMode::validate() const
{
    require(finite(omega_m) && omega_m > 0.0, "MechMode: omega_m must be positive");
    require(finite(gamma_i) && gamma_i >= 0.0, "MechMode: gamma_i must be non-negative");
    require(finite(n_bath_m) && n_bath_m >= 0.0, "MechMode: n_bath_m must be non-negative");
}

double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

double watts_to_dbm(double watts)
{
    require(watts > 0.0, "watts_to_dbm: power must be positive");
    return 10.0 * std::log10(watts / 1e-3);
}

double DriveConfig::power_at_cavity_w() const { return dbm_to_watts(attenuation_db + power_in_dbm); }

SupermodePair supermode_frequencies(double omega_r0, double J)
{
    require(omega_r0 > 0.0, "supermode_frequencies: omega_r0 must be positive");
    require(J >= 0.0, "supermode_frequencies: J must be non-negative");
    return {omega_r0 + J, omega_r0 - J};
}

ComplexResponse chi_electrical(double omega, double kappa, double delta)
{
    require(kappa >= 0.0, "chi_electrical: kappa must be non-negative");
    const std::complex<double> inv(kappa / 2.0, delta - omega);
    if (inv == 0.0)
        throw SingularityError("chi_electrical: kappa = 0 at omega = Delta");
    return {1.0 / inv, ResponseUnit::Seconds, ComplexResponse::kNone};
}

ComplexResponse chi_mechanical(double omega, double gamma_i, double omega_m, double gamma_floor)
{
    require(gamma_i >= 0.0, "chi_mechanical: gamma_i must be non-negative");
    unsigned flags = ComplexResponse::kNone;
    double gamma = gamma_i;
    if (gamma == 0.0)
    {
        gamma = gamma_floor;
        flags |= ComplexResponse::kDampingFloored;
    }
    const std::complex<double> inv(gamma / 2.0, omega_m - omega);
    if (inv == 0.0)
        throw SingularityError("chi_mechanical: zero damping at omega = omega_m");
    return {1.0 / inv, ResponseUnit::Seconds, flags};
}

double intracavity_photons(const DriveConfig &drive, const CavityPair &cav)
{
    require(cav.kappa_minus > 0.0, "intracavity_photons: kappa_minus must be positive");
    require(finite(drive.power_in_dbm) && finite(drive.attenuation_db),
            "intracavity_photons: power and attenuation must be finite");
    require(drive.omega_d > 0.0, "intracavity_photons: omega_d must be positive");
    const double flux = drive.power_at_cavity_w() / (constants::kHbar * drive.omega_d);
    const double delta = drive.delta_minus(cav);
    return flux * 4.0 * cav.kappa_e_minus / (cav.kappa_minus * cav.kappa_minus + 4.0 * delta * delta);
}

double power_for_photons(double n_d, double omega_d, const CavityPair &cav)
{
    require(n_d >= 0.0, "power_for_photons: n_d must be non-negative");
    require(cav.kappa_e_minus > 0.0, "power_for_photons: kappa_e_minus must be positive");
    require(omega_d > 0.0, "power_for_photons: omega_d must be positive");
    const double delta = cav.omega_minus() - omega_d;
    const double lorentz =
        4.0 * cav.kappa_e_minus / (cav.kappa_minus * cav.kappa_minus + 4.0 * delta * delta);
    return n_d * constants::kHbar * omega_d / lorentz;
}

double enhanced_coupling(double g0_pm, double n_d)
{
    require(n_d >= 0.0, "enhanced_coupling: n_d must be non-negative");
    return g0_pm * std::sqrt(n_d);
}

} // namespace emx
