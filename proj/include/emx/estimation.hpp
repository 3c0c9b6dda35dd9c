#ifndef EMX_ESTIMATION_HPP
#define EMX_ESTIMATION_HPP

#include "emx/dynamics.hpp"
#include "emx/lm.hpp"
#include "emx/spectra.hpp"

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace emx
{

enum class Convergence
{
    Converged,
    MaxIter,
    Degenerate,
};

std::string to_string(Convergence c);
Convergence convergence_from_string(const std::string &s);

struct ParamEstimate
{
    double value = 0.0;
    double sigma = 0.0;
    std::string unit; // "Hz" or "" (dimensionless)
};

using NamedValues = std::vector<std::pair<std::string, double>>;

struct StageEntry
{
    std::string name;
    NamedValues inputs;
    NamedValues outputs;
    std::string note;
};

// Parameters are kept in insertion order so reports are reproducible.
struct FitReport
{
    std::vector<std::pair<std::string, ParamEstimate>> params;
    double residual_norm = 0.0;
    std::vector<StageEntry> stage_log;
    Convergence convergence = Convergence::Converged;
    std::vector<std::string> warnings;

    void set(const std::string &name, double value, double sigma, const std::string &unit);
    bool has(const std::string &name) const;
    const ParamEstimate &at(const std::string &name) const;
    double value(const std::string &name) const { return at(name).value; }
    double sigma(const std::string &name) const { return at(name).sigma; }
};

// --- Lorentzian ------------------------------------------------------------

// |1 - ke / (k/2 + i (f - f0))| with all arguments in Hz.
double lorentzian_reflection(double f_hz, double centre_hz, double kappa_hz, double kappa_e_hz);

struct LorentzianFitOptions
{
    // Samples inside any [lo, hi] interval are ignored.
    std::vector<std::pair<double, double>> masks;
    // Holds kappa_e at this value (Hz) instead of fitting it.
    std::optional<double> fixed_kappa_e_hz;
    LmOptions lm;
};

// Reports centre_hz, kappa_hz, kappa_e_hz.
FitReport fit_lorentzian(const SpectrumTrace &trace, const LorentzianFitOptions &opts = {});

// --- EIT pipeline ----------------------------------------------------------

struct RingdownPrior
{
    double G_hz = 0.0;
    double G_sigma_hz = 0.0;
    double gamma_i_hz = 0.0;
    double gamma_i_sigma_hz = 0.0;
};

struct EitPipelineOptions
{
    double omega_m_hz = 0.0;              // nominal mechanical frequency
    double resonance_tolerance_hz = 50e3; // |Delta - omega_m| for the two-photon trace
    double mask_halfwidth_hz = 100e3;     // excluded around the mechanical feature in stage 1
    JitterShape jitter_shape = JitterShape::Gaussian;
    double stage2_window_factor = 0.6;    // central window half-width in units of G
    double stage4_window_factor = 2.5;    // inverse-fit half-width in units of G
    bool propagate_uncertainty = true;
};

// Four ordered stages: off-resonance Lorentzians, transparency-window jitter,
// inverse-response peak splitting, jitter-aware inverse fit.
FitReport fit_eit_pipeline(std::span<const SpectrumTrace> traces, const std::optional<RingdownPrior> &prior,
                           const EitPipelineOptions &opts);

// Jitter-averaged |S11| for overlays, all parameters in Hz.
struct EitModelParams
{
    double centre_hz = 0.0;
    double kappa_hz = 0.0;
    double kappa_e_hz = 0.0;
    double G_hz = 0.0;
    double gamma_i_hz = 0.0;
    double mech_offset_hz = 0.0; // omega_m - Delta, relative to the cavity centre
    JitterKernel jitter;
};

std::vector<double> eit_model_magnitude(std::span<const double> freqs_hz, const EitModelParams &p);

// Quadratic Savitzky-Golay smoothing on a uniform grid; edges kept as-is.
std::vector<double> savitzky_golay(std::span<const double> y, std::size_t half_window);

// --- Ringdown --------------------------------------------------------------

struct RingdownFitOptions
{
    double breakpoint_factor = 3.0; // local |slope| below factor * asymptotic |slope|
    std::size_t slope_window = 5;
    double floor_factor = 3.0;      // tail samples kept while model > factor * noise
    std::optional<double> noise_sigma;
};

// Reports gamma_m_hz (energy decay rate / 2pi) and, when a fast segment is
// present, kappa_plus_hz.
FitReport fit_ringdown(const RingdownTrace &trace, const RingdownFitOptions &opts = {});

// Robust per-sample noise estimate from first differences (MAD / sqrt 2).
double estimate_noise_sigma(std::span<const double> y);

// --- g0 slope --------------------------------------------------------------

struct DampingPoint
{
    double n_d = 0.0;
    double gamma_m = 0.0; // rad/s
    double weight = 1.0;
};

// gamma_m = gamma_i + (4 g0_pm^2 / kappa_plus) n_d. Reports g0_pm_hz, g0_hz,
// gamma_i_intercept_hz, slope_hz.
FitReport fit_g0_slope(std::span<const DampingPoint> points, double kappa_plus);

// --- occupancy ---------------------------------------------------------------

struct OccupancyCalibration
{
    double n_m = 0.0;
    double area_hz = 0.0; // integral of the background-subtracted PSD (quanta)
    std::vector<std::string> warnings;
};

// The trace must be background-subtracted. Values with meta.extra["units"] ==
// "W/Hz" are converted to quanta with the gain and hbar omega_plus; otherwise
// they are taken as quanta already. Anti-Stokes detection: area = (ke/k) gamma_em n_m.
OccupancyCalibration calibrate_occupancy(const SpectrumTrace &npsd, double gain_db, double gamma_em,
                                         const CavityPair &cav);

// --- heating -----------------------------------------------------------------

// n(t) = nb e^{-g t} + nH (1 - e^{-g t}) + nd (e^{-gs t} - e^{-g t}), rates in rad/s.
double heating_shape(double t, double n_bath_m, double n_hot, double gamma, double n_delta, double gamma_s);

// Reports n_bath_m, n_hot, gamma_hz, n_delta, gamma_s_hz.
FitReport fit_heating(std::span<const double> times, std::span<const double> n_m);

} // namespace emx

#endif // EMX_ESTIMATION_HPP
