#ifndef EMX_CONFIG_HPP
#define EMX_CONFIG_HPP

#include "emx/designer.hpp"
#include "emx/model_core.hpp"
#include "emx/spectra.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace emx
{

// Invalid configuration. `where` is a line number ("line 12") for syntax
// errors or a field path ("device.kappa_plus_hz") for bad values.
class ConfigError : public std::runtime_error
{
public:
    ConfigError(std::string where, const std::string &what);
    const std::string &where() const { return where_; }

private:
    std::string where_;
};

// One pump tone. Either power_in_dbm or n_d is given; detuning is from the
// even supermode, Delta_{r+,d}.
struct DriveSpec
{
    double detuning_hz = 0.0;
    std::optional<double> power_in_dbm;
    std::optional<double> n_d;
};

struct NoiseSpec
{
    double reflection_sigma = 0.01; // on |S11|
    double ringdown_sigma = 0.01;   // relative to the mechanical amplitude
    double npsd_sigma = 0.01;       // quanta per bin
    double heating_sigma = 0.05;    // quanta
};

struct SweepSpec
{
    double n_d = 2.357e5;
    std::vector<double> offsets_hz{-450e3, -300e3, -150e3, 150e3, 300e3, 450e3}; // Delta - omega_m
    double span_hz = 600e3;
    std::size_t points = 1201;
    double resonance_span_hz = 60e3;
    std::size_t resonance_points = 1201;
};

struct RingdownSpec
{
    std::vector<double> n_d{0.0, 2.5e4, 5e4, 1e5, 1.42e5};
    double cavity_amplitude = 20.0; // relative to the mechanical amplitude
    double duration_decays = 6.0;   // in units of 1/gamma_m
    std::size_t points = 1000;
};

struct HeatingSpec
{
    double n_d = 7.1e4;
    double gamma_p_hz = 200.0;
    double n_hot = 8.9;
    double delta_b = 0.4;
    double gamma_s_hz = 60.0;
    double duration_s = 15e-3;
    std::size_t points = 1500;
};

struct NpsdSpec
{
    std::vector<double> n_d{7.1e4, 4.3e5};
    double gain_db = 57.6;
    double span_hz = 200e3;
    std::size_t points = 8001;
};

struct DesignSpec
{
    CoilGeometry coil;
    WheelerCoefficients coefficients;
    double srf_hz = 13.98e9;
    double c_motional_ff = 2.1;
    std::optional<double> m_eff_kg;
    std::optional<double> dc_du_f_per_m;
};

struct ExperimentConfig
{
    CavityPair cavity;
    MechMode mech;
    double g0_pm = 0.0;          // rad/s
    double attenuation_db = -76.0;
    std::vector<DriveSpec> drives;
    JitterKernel jitter;
    NoiseSpec noise;
    std::uint64_t seed = 1;
    std::optional<std::string> output_dir;
    SweepSpec sweep;
    RingdownSpec ringdown;
    HeatingSpec heating;
    NpsdSpec npsd;
    DesignSpec design;

    // Drive frequency (rad/s) for a detuning from the even supermode.
    double drive_frequency(double detuning_hz) const;
    // Intra-cavity photons for a drive, from power or given directly.
    double photons(const DriveSpec &drive) const;
    double coupling(double n_d) const { return enhanced_coupling(g0_pm, n_d); }
};

// Device values quoted for the two-mode nanobeam device; every field can be
// overridden from a config file.
ExperimentConfig default_config();

ExperimentConfig parse_config(const std::string &text);
ExperimentConfig load_config(const std::filesystem::path &path);
std::string config_to_json(const ExperimentConfig &cfg);

} // namespace emx

#endif // EMX_CONFIG_HPP
