#pragma once

// Synthetic problems: phantoms with known momentum transfer profiles, a random
// sparse multiplexing operator and seeded Poisson sampling.
//
// All generators draw from std::mt19937_64, whose output sequence is fixed by
// the C++ standard, and map raw 64-bit words to doubles themselves (top 53
// bits), so fixtures are reproducible across platforms and standard libraries.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "scatter/grid.hpp"

namespace scatter {

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  private:
    std::mt19937_64 engine_;
};

/// Draws one Poisson variate. Means below 10 use sequential inversion; larger
/// means use Hoermann's PTRS transformed rejection with squeeze.
std::uint64_t poisson_draw(double mean, Rng& rng);

/// Element-wise independent Poisson draws, consumed in index order from one
/// generator seeded with `seed`.
std::vector<double> poisson_sample(std::span<const double> means, std::uint64_t seed);

/// Sum of Gaussians over spectral bin index, normalized to unit l2 energy.
std::vector<double> gaussian_mixture_template(std::size_t num_q, std::span<const double> centers,
                                              std::span<const double> widths);

/// Half-open rectangle [z0, z1) x [y0, y1) of spatial bins filled with one material.
struct Region {
    std::size_t z0 = 0, z1 = 0;
    std::size_t y0 = 0, y1 = 0;
    std::size_t material = 0;
    double amplitude = 1.0;
};

struct PhantomSpec {
    std::vector<std::vector<double>> templates;  // one spectrum per material, length Q
    std::vector<Region> regions;
};

struct Phantom {
    ImageGrid grid;
    /// Region index per spatial bin, -1 for background.
    std::vector<int> labels;
    /// Unit-energy templates.
    std::vector<std::vector<double>> templates;
    std::vector<Region> regions;
    HyperImage image;
};

/// f(s, q) = amplitude(region(s)) * template(region(s))[q], zero in background.
/// Throws ValidationError for overlapping or out-of-grid regions.
Phantom make_phantom(const ImageGrid& grid, const PhantomSpec& spec);

/// I x J random nonnegative mixing matrix: each entry is present with
/// probability `density` and drawn from Uniform(0.5, 1.5); empty rows and empty
/// columns are redrawn; columns are finally rescaled to unit sum.
SparseSystemMatrix make_system(const ImageGrid& grid, std::size_t rows, double density, std::uint64_t seed);

/// Parameters of the default synthetic fixture.
struct FixtureSpec {
    std::size_t nz = 8, ny = 8, num_q = 16;
    double dz = 5.0, dy = 1.5;
    double q_min = 0.05, q_max = 0.4475;
    Region region{3, 6, 3, 5, 0, 1.0};
    std::vector<double> peak_bins{4.0, 10.0};
    std::vector<double> peak_widths{1.5, 1.5};
    std::size_t measurements_per_voxel = 2;
    double density = 0.1;
    /// Target average of ybar = A f + r over all measurements.
    double mean_counts = 26.0;
    /// Fraction of mean_counts contributed by the uniform background.
    double background_fraction = 0.1;
    std::uint64_t seed = 0;
};

struct Fixture {
    FixtureSpec spec;
    Phantom phantom;
    SparseSystemMatrix a;
    std::vector<double> mean;
    MeasurementSet m;
};

/// Builds the fixture. The region amplitude is chosen so that the mean of ybar
/// equals spec.mean_counts. The matrix uses `seed`, the counts use `seed + 1`.
Fixture make_fixture(const FixtureSpec& spec);

/// Writes A.txt, y.txt, r.txt, truth.csv, manifest.json and a ready-to-run
/// config.json into dir.
void write_fixture(const Fixture& fixture, const std::filesystem::path& dir);

}  // namespace scatter
