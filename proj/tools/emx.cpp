#include "emx/commands.hpp"
#include "emx/io.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char **argv)
{
    CLI::App app{"Forward models and parameter fits for two-mode electromechanical devices"};
    app.require_subcommand(1);

    std::optional<std::string> config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> grid;

    auto common = [&](CLI::App *sub) {
        sub->add_option("--config", config_path, "JSON experiment config (defaults built in)");
        sub->add_option("--out", out_dir, "output directory (default: $EMX_OUT_DIR or ./emx_out)");
        sub->add_option("--seed", seed, "overrides the config seed");
    };

    std::string spectrum_kind;
    auto *spectrum = app.add_subcommand("spectrum", "evaluate eit, inverse or npsd spectra for each configured drive");
    spectrum->add_option("kind", spectrum_kind, "eit | inverse | npsd")->required()->check(
        CLI::IsMember({"eit", "inverse", "npsd"}));
    spectrum->add_option("--grid", grid, "probe grid start,stop,points in Hz");
    common(spectrum);

    auto *synth = app.add_subcommand("synth", "generate a noisy synthetic dataset with a ground-truth manifest");
    common(synth);

    std::string pipeline;
    std::string data_dir;
    auto *fit = app.add_subcommand("fit", "fit a dataset and write a report with model overlays");
    fit->add_option("pipeline", pipeline, "lorentzian | eit | ringdown | g0slope | occupancy | heating")
        ->required()
        ->check(CLI::IsMember({"lorentzian", "eit", "ringdown", "g0slope", "occupancy", "heating"}));
    fit->add_option("dataset", data_dir, "directory of trace files")->required();
    common(fit);

    auto *design = app.add_subcommand("design", "inductance, capacitance and participation from the coil geometry");
    common(design);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? emx::kExitOk : emx::kExitInputError;
    }

    try
    {
        emx::ExperimentConfig cfg = config_path ? emx::load_config(*config_path) : emx::default_config();
        if (seed)
            cfg.seed = *seed;
        const auto out = emx::resolve_output_dir(out_dir, cfg);

        if (spectrum->parsed())
        {
            std::optional<emx::GridSpec> g;
            if (grid)
                g = emx::parse_grid(*grid);
            return emx::cmd_spectrum(cfg, spectrum_kind, g, out, std::cout);
        }
        if (synth->parsed())
            return emx::cmd_synth(cfg, out, std::cout);
        if (fit->parsed())
            return emx::cmd_fit(cfg, pipeline, data_dir, out, std::cout);
        return emx::cmd_design(cfg, out, std::cout);
    }
    catch (const emx::ConfigError &e)
    {
        std::cerr << "emx: invalid input: " << e.what() << "\n";
        return emx::kExitInputError;
    }
    catch (const emx::FormatError &e)
    {
        std::cerr << "emx: malformed file: " << e.what() << "\n";
        return emx::kExitInputError;
    }
    catch (const emx::DomainError &e)
    {
        std::cerr << "emx: invalid input: " << e.what() << "\n";
        return emx::kExitInputError;
    }
    catch (const std::exception &e)
    {
        std::cerr << "emx: " << e.what() << "\n";
        return emx::kExitInputError;
    }
}
