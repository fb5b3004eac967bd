// scatter_recon: reconstruct hyperspectral coherent-scatter images from Poisson
// counts, sweep the regularization strength, generate synthetic fixtures and
// export analysis products.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "scatter/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Group-TV penalized Poisson reconstruction for X-ray coherent scatter"};
    app.require_subcommand(1);

    std::string config;
    std::string betas;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    bool deterministic = false;

    auto add_run_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", config, "Run configuration (JSON)")->required();
        cmd->add_option("--seed", seed, "Override the configured seed");
        cmd->add_option("--threads", threads, "Worker threads (falls back to SCATTER_RECON_THREADS)");
        cmd->add_flag("--deterministic", deterministic, "Force deterministic reductions");
    };

    CLI::App* reconstruct = app.add_subcommand("reconstruct", "Run one reconstruction from a config file");
    add_run_flags(reconstruct);

    CLI::App* sweep = app.add_subcommand("sweep", "Reconstruct for several betas and score against the truth image");
    add_run_flags(sweep);
    sweep->add_option("--betas", betas, "Comma-separated list of betas")->required();

    scatter::FixtureSpec spec;
    std::string out_dir = "fixture";
    CLI::App* simulate = app.add_subcommand("simulate", "Write a synthetic fixture");
    simulate->add_option("--out", out_dir, "Output directory");
    simulate->add_option("--seed", spec.seed, "Fixture seed");
    simulate->add_option("--nz", spec.nz);
    simulate->add_option("--ny", spec.ny);
    simulate->add_option("--Q", spec.num_q);
    simulate->add_option("--density", spec.density, "Probability of a nonzero system-matrix entry");
    simulate->add_option("--mean-counts", spec.mean_counts, "Average expected count per measurement");
    simulate->add_option("--background-fraction", spec.background_fraction);
    simulate->add_option("--measurements-per-voxel", spec.measurements_per_voxel);

    std::string image;
    std::string analyze_out = "analysis";
    CLI::App* analyze = app.add_subcommand("analyze", "Spatial distribution, display transform and peak profile");
    analyze->add_option("--image", image, "Image CSV")->required();
    analyze->add_option("--out", analyze_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return scatter::kExitValidation;
    }

    try {
        scatter::RunOverrides overrides;
        overrides.seed = seed;
        overrides.deterministic = deterministic;
        if (*reconstruct || *sweep) overrides.threads = scatter::resolve_threads(threads);

        if (*reconstruct) return scatter::cmd_reconstruct(config, overrides, std::cout, std::cerr);
        if (*sweep) {
            const auto list = scatter::parse_beta_list(betas);
            return scatter::cmd_sweep(config, list, overrides, std::cout, std::cerr);
        }
        if (*simulate) return scatter::cmd_simulate(spec, out_dir, std::cout, std::cerr);
        if (*analyze) return scatter::cmd_analyze(image, analyze_out, std::cout, std::cerr);
    } catch (const scatter::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return scatter::kExitValidation;
    }
    return scatter::kExitValidation;
}
