#pragma once

// Text file formats.
//
//   system matrix   "# rows=I cols=J nnz=K" then one "row col value" per line (0-based)
//   vectors         one value per line; count vectors must hold nonnegative integers
//   image           "# nz=.. ny=.. Q=.. dz=.. dy=.. q_min=.. q_max=.." then one
//                   comma-separated row of Q values per spatial bin
//   trace           "iter,objective,nll,penalty,primal_res,dual_res"
//
// Reals are written with 17 significant digits so files round-trip exactly.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "scatter/grid.hpp"
#include "scatter/solver.hpp"

namespace scatter {

std::string format_real(double value);

SparseSystemMatrix read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const SparseSystemMatrix& a);

std::vector<double> read_vector(const std::filesystem::path& path);
/// Like read_vector but every entry must be a nonnegative integer.
std::vector<double> read_counts(const std::filesystem::path& path);
void write_vector(const std::filesystem::path& path, std::span<const double> values);
void write_counts(const std::filesystem::path& path, std::span<const double> counts);

HyperImage read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const HyperImage& image);

void write_trace(const std::filesystem::path& path, std::span<const TraceRecord> traces);

/// Solver settings plus grid and input/output locations. Relative paths in the
/// JSON document are resolved against the directory holding the config file.
struct RunConfig {
    SolverConfig solver;
    ImageGrid grid{1, 1, 1, 1.0, 1.0, 0.0, 1.0};
    std::filesystem::path matrix;
    std::filesystem::path counts;
    std::filesystem::path background;
    std::optional<std::filesystem::path> weights;
    std::optional<std::filesystem::path> truth;
    std::filesystem::path output_dir;
};

/// Throws ValidationError on unknown keys, missing required keys or bad values.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const SolverConfig& config);
nlohmann::json to_json(const ImageGrid& grid);
nlohmann::json to_json(const RunConfig& config);

}  // namespace scatter
