#include "emx/designer.hpp"

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

bool positive(double x) { return std::isfinite(x) && x > 0.0; }
} // namespace

void CoilGeometry::validate() const
{
    require(positive(wire_width), "CoilGeometry: wire_width must be positive");
    require(positive(pitch), "CoilGeometry: pitch must be positive");
    require(positive(turns), "CoilGeometry: turns must be positive");
    require(positive(outer_dim), "CoilGeometry: outer_dim must be positive");
    require(positive(thickness), "CoilGeometry: thickness must be positive");
    require(wire_width <= pitch, "CoilGeometry: wire_width exceeds pitch");
    require(inner_dim() > 0.0, "CoilGeometry: turns * pitch leaves no inner opening");
}

double wheeler_inductance(const CoilGeometry &geom, const WheelerCoefficients &coef)
{
    geom.validate();
    const double d_out = geom.outer_dim;
    const double d_in = geom.inner_dim();
    const double d_avg = 0.5 * (d_out + d_in);
    const double fill = (d_out - d_in) / (d_out + d_in);
    return coef.k1 * constants::kMu0 * geom.turns * geom.turns * d_avg / (1.0 + coef.k2 * fill);
}

double stray_capacitance_from_srf(double inductance, double omega_srf)
{
    require(positive(inductance), "stray_capacitance_from_srf: inductance must be positive");
    require(positive(omega_srf), "stray_capacitance_from_srf: omega_srf must be positive");
    return 1.0 / (inductance * omega_srf * omega_srf);
}

double lc_frequency(double inductance, double capacitance)
{
    require(positive(inductance) && positive(capacitance), "lc_frequency: L and C must be positive");
    return 1.0 / std::sqrt(inductance * capacitance);
}

double participation_ratio(const CapacitorBudget &budget)
{
    require(budget.c_motional >= 0.0 && budget.c_stray >= 0.0,
            "participation_ratio: capacitances must be non-negative");
    require(budget.total() > 0.0, "participation_ratio: total capacitance must be positive");
    return budget.c_motional / budget.total();
}

double zero_point_motion(double m_eff, double omega_m)
{
    require(positive(m_eff) && positive(omega_m), "zero_point_motion: mass and frequency must be positive");
    return std::sqrt(constants::kHbar / (2.0 * m_eff * omega_m));
}

double g0_from_circuit(double eta, double x_zpf, double omega_r0, double c_motional, double dc_du)
{
    require(positive(c_motional), "g0_from_circuit: C_m must be positive");
    return -eta * x_zpf * (omega_r0 / (2.0 * c_motional)) * dc_du;
}

} // namespace emx
