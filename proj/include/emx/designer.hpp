#ifndef EMX_DESIGNER_HPP
#define EMX_DESIGNER_HPP

namespace emx
{

// Square planar spiral. All lengths in metres.
struct CoilGeometry
{
    double wire_width = 0.0;
    double pitch = 0.0;
    double turns = 0.0;
    double outer_dim = 0.0; // side of the square envelope
    double thickness = 0.0;

    double inner_dim() const { return outer_dim - 2.0 * turns * pitch; }
    void validate() const;
};

// Modified Wheeler coefficients; defaults are the square-spiral set.
struct WheelerCoefficients
{
    double k1 = 2.34;
    double k2 = 2.75;
};

struct CapacitorBudget
{
    double c_motional = 0.0; // F
    double c_stray = 0.0;    // F, coil parasitic plus wiring

    double total() const { return c_motional + c_stray; }
};

// L = k1 mu0 n^2 d_avg / (1 + k2 rho).
double wheeler_inductance(const CoilGeometry &geom, const WheelerCoefficients &coef = {});

// C = 1 / (L omega_srf^2).
double stray_capacitance_from_srf(double inductance, double omega_srf);

// omega = 1 / sqrt(L C).
double lc_frequency(double inductance, double capacitance);

double participation_ratio(const CapacitorBudget &budget);

double zero_point_motion(double m_eff, double omega_m);

// g0 = -eta x_zpf (omega_r0 / 2 C_m) dC_m/du, sign kept.
double g0_from_circuit(double eta, double x_zpf, double omega_r0, double c_motional, double dc_du);

} // namespace emx

#endif // EMX_DESIGNER_HPP
