#include "scatter/simulate.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "json.hpp"
#include "scatter/io.hpp"
#include "scatter/likelihood.hpp"

namespace scatter {

namespace {

std::uint64_t poisson_inversion(double mean, Rng& rng) {
    // Sequential search of the CDF; exp(-mean) does not underflow for mean < 10.
    const double u = rng.uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::uint64_t k = 0;
    while (u > cdf && k < 1000) {
        ++k;
        p *= mean / static_cast<double>(k);
        cdf += p;
    }
    return k;
}

// W. Hoermann, "The transformed rejection method for generating Poisson random
// variables", Insurance: Mathematics and Economics 12 (1993).
std::uint64_t poisson_ptrs(double mean, Rng& rng) {
    const double log_mean = std::log(mean);
    const double b = 0.931 + 2.53 * std::sqrt(mean);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    while (true) {
        const double u = rng.uniform() - 0.5;
        const double v = rng.uniform();
        const double us = 0.5 - std::abs(u);
        const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(k);
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
            -mean + k * log_mean - std::lgamma(k + 1.0))
            return static_cast<std::uint64_t>(k);
    }
}

}  // namespace

std::uint64_t poisson_draw(double mean, Rng& rng) {
    if (!(mean >= 0.0) || !std::isfinite(mean))
        throw ValidationError("Poisson mean must be finite and >= 0, got " + std::to_string(mean));
    if (mean == 0.0) return 0;
    return mean < 10.0 ? poisson_inversion(mean, rng) : poisson_ptrs(mean, rng);
}

std::vector<double> poisson_sample(std::span<const double> means, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> out(means.size());
    for (std::size_t i = 0; i < means.size(); ++i) out[i] = static_cast<double>(poisson_draw(means[i], rng));
    return out;
}

std::vector<double> gaussian_mixture_template(std::size_t num_q, std::span<const double> centers,
                                              std::span<const double> widths) {
    if (centers.size() != widths.size()) throw ValidationError("template needs one width per peak");
    std::vector<double> t(num_q, 0.0);
    for (std::size_t k = 0; k < centers.size(); ++k) {
        if (!(widths[k] > 0.0)) throw ValidationError("template peak widths must be > 0");
        for (std::size_t q = 0; q < num_q; ++q) {
            const double z = (static_cast<double>(q) - centers[k]) / widths[k];
            t[q] += std::exp(-0.5 * z * z);
        }
    }
    const double norm = std::sqrt(std::inner_product(t.begin(), t.end(), t.begin(), 0.0));
    if (!(norm > 0.0)) throw ValidationError("template has zero energy");
    for (double& v : t) v /= norm;
    return t;
}

Phantom make_phantom(const ImageGrid& grid, const PhantomSpec& spec) {
    std::vector<std::vector<double>> templates;
    for (std::size_t m = 0; m < spec.templates.size(); ++m) {
        const auto& t = spec.templates[m];
        if (t.size() != grid.num_q())
            throw ValidationError("template " + std::to_string(m) + " has length " + std::to_string(t.size()) +
                                  ", expected Q = " + std::to_string(grid.num_q()));
        double energy = 0.0;
        for (double v : t) {
            if (!(v >= 0.0)) throw ValidationError("template " + std::to_string(m) + " has a negative value");
            energy += v * v;
        }
        if (!(energy > 0.0)) throw ValidationError("template " + std::to_string(m) + " has zero energy");
        std::vector<double> unit(t);
        for (double& v : unit) v /= std::sqrt(energy);
        templates.push_back(std::move(unit));
    }

    std::vector<int> labels(grid.num_spatial(), -1);
    std::vector<double> values(grid.num_voxels(), 0.0);
    for (std::size_t k = 0; k < spec.regions.size(); ++k) {
        const Region& r = spec.regions[k];
        if (r.z0 >= r.z1 || r.y0 >= r.y1 || r.z1 > grid.nz() || r.y1 > grid.ny())
            throw ValidationError("region " + std::to_string(k) + " is empty or outside the grid");
        if (r.material >= templates.size())
            throw ValidationError("region " + std::to_string(k) + " refers to unknown material " +
                                  std::to_string(r.material));
        if (!(r.amplitude >= 0.0)) throw ValidationError("region " + std::to_string(k) + " has negative amplitude");
        for (std::size_t iz = r.z0; iz < r.z1; ++iz) {
            for (std::size_t iy = r.y0; iy < r.y1; ++iy) {
                const std::size_t s = grid.spatial_index(iz, iy);
                if (labels[s] != -1)
                    throw ValidationError("region " + std::to_string(k) + " overlaps region " +
                                          std::to_string(labels[s]));
                labels[s] = static_cast<int>(k);
                for (std::size_t q = 0; q < grid.num_q(); ++q)
                    values[grid.linearize(s, q)] = r.amplitude * templates[r.material][q];
            }
        }
    }
    return Phantom{grid, std::move(labels), std::move(templates), spec.regions, HyperImage(grid, std::move(values))};
}

SparseSystemMatrix make_system(const ImageGrid& grid, std::size_t rows, double density, std::uint64_t seed) {
    if (!(density > 0.0 && density <= 1.0))
        throw ValidationError("density must be in (0, 1], got " + std::to_string(density));
    if (rows == 0) throw ValidationError("system matrix needs at least one row");
    const std::size_t cols = grid.num_voxels();
    Rng rng(seed);
    auto present = [&] { return density >= 1.0 || rng.uniform() < density; };
    auto value = [&] { return 0.5 + rng.uniform(); };

    std::vector<Triplet> triplets;
    std::vector<std::size_t> col_count(cols, 0);
    std::vector<Triplet> row;
    for (std::size_t i = 0; i < rows; ++i) {
        do {
            row.clear();
            for (std::size_t j = 0; j < cols; ++j)
                if (present()) row.push_back({i, j, value()});
        } while (row.empty());
        for (const auto& t : row) ++col_count[t.col];
        triplets.insert(triplets.end(), row.begin(), row.end());
    }
    for (std::size_t j = 0; j < cols; ++j) {
        while (col_count[j] == 0) {
            for (std::size_t i = 0; i < rows; ++i) {
                if (present()) {
                    triplets.push_back({i, j, value()});
                    ++col_count[j];
                }
            }
        }
    }

    std::vector<double> sums(cols, 0.0);
    for (const auto& t : triplets) sums[t.col] += t.value;
    for (auto& t : triplets) t.value /= sums[t.col];
    return SparseSystemMatrix(rows, cols, std::move(triplets));
}

Fixture make_fixture(const FixtureSpec& spec) {
    const ImageGrid grid(spec.nz, spec.ny, spec.num_q, spec.dz, spec.dy, spec.q_min, spec.q_max);
    const auto tmpl = gaussian_mixture_template(spec.num_q, spec.peak_bins, spec.peak_widths);
    if (!(spec.background_fraction >= 0.0 && spec.background_fraction < 1.0))
        throw ValidationError("background_fraction must be in [0, 1)");
    if (!(spec.mean_counts > 0.0)) throw ValidationError("mean_counts must be > 0");

    const std::size_t rows = spec.measurements_per_voxel * grid.num_voxels();
    const std::size_t region_bins = (spec.region.z1 - spec.region.z0) * (spec.region.y1 - spec.region.y0);
    const double tmpl_sum = std::accumulate(tmpl.begin(), tmpl.end(), 0.0);
    // Columns sum to one, so sum_i (A f)_i = sum_j f_j.
    Region region = spec.region;
    region.material = 0;
    region.amplitude = (1.0 - spec.background_fraction) * spec.mean_counts * static_cast<double>(rows) /
                       (static_cast<double>(region_bins) * tmpl_sum);

    Phantom phantom = make_phantom(grid, PhantomSpec{{tmpl}, {region}});
    SparseSystemMatrix a = make_system(grid, rows, spec.density, spec.seed);
    std::vector<double> r(rows, spec.background_fraction * spec.mean_counts);
    std::vector<double> mean = forward_project(a, phantom.image.values(), r);
    std::vector<double> y = poisson_sample(mean, spec.seed + 1);
    MeasurementSet m(std::move(y), std::move(r));
    return Fixture{spec, std::move(phantom), std::move(a), std::move(mean), std::move(m)};
}

void write_fixture(const Fixture& fx, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_matrix(dir / "A.txt", fx.a);
    write_counts(dir / "y.txt", fx.m.counts());
    write_vector(dir / "r.txt", fx.m.background());
    write_image(dir / "truth.csv", fx.phantom.image);

    const auto& s = fx.spec;
    nlohmann::json manifest;
    manifest["seed"] = s.seed;
    manifest["matrix_seed"] = s.seed;
    manifest["counts_seed"] = s.seed + 1;
    manifest["rng"] = "mt19937_64, uniform = (word >> 11) * 2^-53";
    manifest["poisson_sampler"] = "inversion for mean < 10, PTRS (Hoermann 1993) otherwise";
    manifest["grid"] = to_json(fx.phantom.grid);
    manifest["region"] = {{"z0", s.region.z0}, {"z1", s.region.z1}, {"y0", s.region.y0}, {"y1", s.region.y1},
                          {"amplitude", fx.phantom.regions.front().amplitude}};
    manifest["peak_bins"] = s.peak_bins;
    manifest["peak_widths"] = s.peak_widths;
    manifest["rows"] = fx.a.rows();
    manifest["density"] = s.density;
    manifest["mean_counts"] = s.mean_counts;
    manifest["background_fraction"] = s.background_fraction;
    manifest["files"] = {{"matrix", "A.txt"}, {"y", "y.txt"}, {"r", "r.txt"}, {"truth", "truth.csv"}};
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';

    nlohmann::json config = to_json(SolverConfig{});
    config.erase("lambda");
    config["beta"] = 1.0;
    config["seed"] = s.seed;
    config["grid"] = to_json(fx.phantom.grid);
    config["matrix"] = "A.txt";
    config["y"] = "y.txt";
    config["r"] = "r.txt";
    config["truth"] = "truth.csv";
    config["output_dir"] = "output";
    std::ofstream(dir / "config.json") << config.dump(2) << '\n';
}

}  // namespace scatter
