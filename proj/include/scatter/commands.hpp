#pragma once

// Subcommands behind the scatter_recon executable.
//
// Exit codes: 0 success, 1 validation or usage error, 2 numerical failure.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "scatter/grid.hpp"
#include "scatter/io.hpp"
#include "scatter/simulate.hpp"
#include "scatter/solver.hpp"

namespace scatter {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitNumerical = 2 };

/// Command-line settings that override the config document.
struct RunOverrides {
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    bool deterministic = false;  // forces deterministic_reductions on
};

/// --threads if given, else SCATTER_RECON_THREADS, else 1.
unsigned resolve_threads(std::optional<unsigned> flag);

struct LoadedProblem {
    RunConfig config;
    SparseSystemMatrix a;
    MeasurementSet m;
    std::optional<EdgeField> weights;
};

LoadedProblem load_problem(const std::filesystem::path& config_path, const RunOverrides& overrides);

struct SweepRow {
    double beta = 0.0;
    double spatial_rmse = 0.0;
    double spectral_rmse = 0.0;
    double objective = 0.0;
    double mtp_cosine = 0.0;  // extracted profile vs truth profile at the same bin
    bool best = false;
};

struct SweepResult {
    std::vector<SweepRow> rows;  // ascending beta
    std::size_t best = 0;
    HyperImage best_image;
};

/// Solves once per beta (lambda follows beta unless fixed in `base`) and scores
/// each reconstruction against `truth`. The best row minimizes the spatial RMSE;
/// ties go to the smaller beta.
SweepResult run_sweep(const SparseSystemMatrix& a, const MeasurementSet& m, const SolverConfig& base,
                      const HyperImage& truth, std::span<const double> betas, const SolveOptions& options = {});

int cmd_reconstruct(const std::filesystem::path& config_path, const RunOverrides& overrides, std::ostream& out,
                    std::ostream& err);

int cmd_sweep(const std::filesystem::path& config_path, std::span<const double> betas, const RunOverrides& overrides,
              std::ostream& out, std::ostream& err);

int cmd_simulate(const FixtureSpec& spec, const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err);

/// Writes spatial.csv, mtp.csv and analysis.json for a saved image.
int cmd_analyze(const std::filesystem::path& image_path, const std::filesystem::path& out_dir, std::ostream& out,
                std::ostream& err);

/// Parses "b1,b2,..." into betas. Throws ValidationError on empty or malformed lists.
std::vector<double> parse_beta_list(const std::string& text);

}  // namespace scatter
