#ifndef EMX_SYNTH_HPP
#define EMX_SYNTH_HPP

#include "emx/config.hpp"
#include "emx/dynamics.hpp"
#include "emx/estimation.hpp"
#include "emx/io.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace emx
{

// Independent generator per trace so adding traces leaves others unchanged.
std::mt19937_64 trace_rng(std::uint64_t seed, std::uint64_t trace_index);

// Trace index bases within a dataset.
inline constexpr std::uint64_t kSweepIndex = 0;
inline constexpr std::uint64_t kBareIndex = 100;
inline constexpr std::uint64_t kRingdownIndex = 200;
inline constexpr std::uint64_t kHeatingIndex = 300;
inline constexpr std::uint64_t kNpsdIndex = 400;

// Off-resonance traces first, the two-photon resonance trace last.
std::vector<SpectrumTrace> synth_eit_sweep(const ExperimentConfig &cfg, std::uint64_t seed);

SpectrumTrace synth_bare_cavity(const ExperimentConfig &cfg, std::uint64_t seed);

struct SynthRingdown
{
    double n_d = 0.0;
    double gamma_m = 0.0; // rad/s, ground truth
    RingdownTrace trace;
};

std::vector<SynthRingdown> synth_ringdowns(const ExperimentConfig &cfg, std::uint64_t seed);

struct SynthHeating
{
    HeatingParams params;
    std::vector<double> times;
    std::vector<double> n_m;
};

SynthHeating synth_heating(const ExperimentConfig &cfg, std::uint64_t seed);

struct SynthNpsd
{
    double n_d = 0.0;
    double n_m = 0.0; // steady-state occupancy, ground truth
    SpectrumTrace trace; // vacuum floor subtracted, quanta
};

std::vector<SynthNpsd> synth_npsd(const ExperimentConfig &cfg, std::uint64_t seed);

// A named file set ready to be written to a directory.
struct Dataset
{
    std::vector<std::pair<std::string, TraceFile>> traces;
    std::string manifest; // JSON with ground truth and file list
};

Dataset synthesize(const ExperimentConfig &cfg);

// Ringdown-derived seeds for the transparency-window stage: damping rates
// against n_d give g0 and gamma_i, then G = g0 sqrt(n_d_target).
struct RingdownPoint
{
    double n_d = 0.0;
    FitReport fit;
};

std::optional<RingdownPrior> ringdown_prior(std::span<const RingdownPoint> points, double kappa_plus,
                                            double n_d_target);

} // namespace emx

#endif // EMX_SYNTH_HPP
