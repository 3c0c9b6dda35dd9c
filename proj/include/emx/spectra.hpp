#ifndef EMX_SPECTRA_HPP
#define EMX_SPECTRA_HPP

#include "emx/model_core.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace emx
{

enum class TraceKind
{
    Reflection,   // |S11|, dimensionless
    InversePower, // 1/|S11|^2
    NPSD,         // quanta-referenced PSD, vacuum floor = 1
};

std::string to_string(TraceKind kind);
TraceKind trace_kind_from_string(const std::string &s);

struct TraceMeta
{
    // Drive detuning from the even supermode, Delta_{r+,d}/2pi (Hz).
    std::optional<double> drive_detuning_hz;
    std::optional<double> n_d;
    std::optional<double> gain_db;
    // Free-form header entries that round-trip through TraceFile.
    std::map<std::string, std::string> extra;
};

// Sampled frequency-domain data. freqs_hz are probe detunings from the even
// supermode, delta_{r+,p}/2pi, in ordinary Hz.
struct SpectrumTrace
{
    std::vector<double> freqs_hz;
    std::vector<double> values;
    TraceKind kind = TraceKind::Reflection;
    TraceMeta meta;

    std::size_t size() const { return freqs_hz.size(); }
    void validate() const;
};

enum class JitterShape
{
    Gaussian,
    Lorentzian,
};

struct JitterKernel
{
    JitterShape shape = JitterShape::Gaussian;
    double fwhm_hz = 0.0;

    // Kernel weights on a grid of the given spacing, centred, normalised to
    // unit sum. Odd length; a single weight of 1 when fwhm is zero.
    std::vector<double> sample(double spacing_hz, double max_half_span_hz) const;
};

// Uniform frequency grid in Hz (inclusive endpoints).
std::vector<double> linear_grid(double start, double stop, std::size_t points);

// Probe reflection in the sideband-resolved limit:
// S11 = 1 - ke / (k/2 + i d + 2G^2 / (gi + 2i(d - (wm - Delta)))).
ComplexResponse s11_eit(double delta_probe, const CavityPair &cav, const MechMode &mech, double G,
                        double delta_drive);

// s11_eit averaged over a distribution of the mechanical frequency. The
// Gaussian case uses trapezoidal quadrature; the Lorentzian case is exact via
// gamma_i -> gamma_i + 2pi fwhm.
ComplexResponse s11_eit_jittered(double delta_probe, const CavityPair &cav, const MechMode &mech,
                                 double G, double delta_drive, const JitterKernel &jitter);

SpectrumTrace reflection_trace(std::span<const double> freqs_hz, const CavityPair &cav,
                               const MechMode &mech, double G, double delta_drive,
                               const JitterKernel &jitter = {});

SpectrumTrace inverse_response(const SpectrumTrace &trace);

struct Peak
{
    double freq_hz = 0.0;
    double value = 0.0;
    std::size_t index = 0;
};

// Local maxima by three-point comparison with parabolic refinement. Plateaus
// resolve to their lowest-frequency sample.
std::vector<Peak> find_peaks(const SpectrumTrace &trace);

struct PeakSplitting
{
    Peak lower;
    Peak upper;
    double separation_hz = 0.0;
};

// The two dominant maxima on either side of the trace's deepest interior
// minimum near centre_hz. Empty when fewer than two peaks are resolvable.
std::optional<PeakSplitting> peak_splitting(const SpectrumTrace &inverse, double centre_hz);

// Output noise PSD of the even mode (quanta-referenced). omega is the
// rotating-frame frequency omega_p - omega_d.
double npsd_sii(double omega, const CavityPair &cav, const MechMode &mech, double G,
                double delta_drive);

struct NpsdTerms
{
    double coherent = 0.0;
    double electrical_bath = 0.0;
    double mechanical_bath = 0.0;
    double total() const { return coherent + electrical_bath + mechanical_bath; }
};

NpsdTerms npsd_terms(double omega, const CavityPair &cav, const MechMode &mech, double G,
                     double delta_drive);

// NPSD on probe detunings (Hz) from the even supermode.
SpectrumTrace npsd_trace(std::span<const double> freqs_hz, const CavityPair &cav,
                         const MechMode &mech, double G, double delta_drive);

double occupancy_steady(const CavityPair &cav, const MechMode &mech, double G);

double backaction_rate(double G, double kappa_plus);

double cooperativity(double G, double kappa_plus, double gamma_i);

// Throws DomainError on a non-uniform grid (relative tolerance 1e-6).
SpectrumTrace jitter_convolve(const SpectrumTrace &trace, const JitterKernel &kernel);

// Linear-interpolation resampling onto a uniform grid with the same span.
SpectrumTrace resample_uniform(const SpectrumTrace &trace, std::size_t points);

bool is_uniform_grid(std::span<const double> freqs, double rel_tol = 1e-6);

struct JitterDecomposition
{
    double ratio = 1.0;           // broadened / intrinsic linewidth
    double gamma_broadened = 0.0; // rad/s
    bool unphysical = false;      // area_nb > area_delta
};

JitterDecomposition jitter_decompose(double area_bb, double area_nb, double area_delta,
                                     double gamma_m);

struct LinewidthBudget
{
    double coherent_share = 0.0; // gamma_m / total
    double fast_share = 0.0;     // (broadened - gamma_m) / total
    double slow_share = 0.0;     // remainder
};

LinewidthBudget linewidth_budget(double total_linewidth, const JitterDecomposition &d,
                                 double gamma_m);

// Trapezoidal area of values over freqs.
double trapezoid_area(std::span<const double> x, std::span<const double> y);

// Full width at half maximum of the dominant peak, linearly interpolated.
double peak_fwhm(std::span<const double> x, std::span<const double> y);

} // namespace emx

#endif // EMX_SPECTRA_HPP
