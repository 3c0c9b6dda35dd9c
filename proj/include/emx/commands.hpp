#ifndef EMX_COMMANDS_HPP
#define EMX_COMMANDS_HPP

#include "emx/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace emx
{

enum ExitCode : int
{
    kExitOk = 0,
    kExitInputError = 1,
    kExitDegenerate = 2,
};

struct GridSpec
{
    double start_hz = 0.0;
    double stop_hz = 0.0;
    std::size_t points = 0;
};

// "start,stop,points"; throws ConfigError on malformed input.
GridSpec parse_grid(const std::string &text);

// Output directory: explicit flag, then the config, then EMX_OUT_DIR, then
// "emx_out". Created and probed for writability.
std::filesystem::path resolve_output_dir(const std::optional<std::string> &flag, const ExperimentConfig &cfg);

// Each command writes its files under out_dir, reports progress on `log`
// and returns an ExitCode.
int cmd_spectrum(const ExperimentConfig &cfg, const std::string &subkind, const std::optional<GridSpec> &grid,
                 const std::filesystem::path &out_dir, std::ostream &log);

int cmd_synth(const ExperimentConfig &cfg, const std::filesystem::path &out_dir, std::ostream &log);

// pipeline: lorentzian | eit | ringdown | g0slope | occupancy | heating.
int cmd_fit(const ExperimentConfig &cfg, const std::string &pipeline, const std::filesystem::path &data_dir,
            const std::filesystem::path &out_dir, std::ostream &log);

int cmd_design(const ExperimentConfig &cfg, const std::filesystem::path &out_dir, std::ostream &log);

} // namespace emx

#endif // EMX_COMMANDS_HPP
