#include "scatter/commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>

#include "json.hpp"
#include "scatter/analysis.hpp"
#include "scatter/diffop.hpp"

namespace scatter {

namespace fs = std::filesystem;
using nlohmann::json;

unsigned resolve_threads(std::optional<unsigned> flag) {
    if (flag) return std::max(1u, *flag);
    if (const char* env = std::getenv("SCATTER_RECON_THREADS")) {
        unsigned value = 0;
        const std::string_view text(env);
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec == std::errc() && ptr == text.data() + text.size() && value > 0) return value;
        throw ValidationError("SCATTER_RECON_THREADS must be a positive integer, got \"" + std::string(text) + "\"");
    }
    return 1;
}

std::vector<double> parse_beta_list(const std::string& text) {
    std::vector<double> out;
    std::string_view rest(text);
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        std::string_view token = rest.substr(0, comma);
        while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
        while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
        if (token.empty() || ec != std::errc() || ptr != token.data() + token.size())
            throw ValidationError("--betas: cannot parse \"" + std::string(token) + "\"");
        if (!(value >= 0.0)) throw ValidationError("--betas: beta must be >= 0");
        out.push_back(value);
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
    }
    if (out.empty()) throw ValidationError("--betas: at least one beta is required");
    return out;
}

LoadedProblem load_problem(const fs::path& config_path, const RunOverrides& overrides) {
    RunConfig config = load_config(config_path);
    if (overrides.seed) config.solver.seed = *overrides.seed;
    if (overrides.deterministic) config.solver.deterministic_reductions = true;

    SparseSystemMatrix a = read_matrix(config.matrix);
    MeasurementSet m(read_counts(config.counts), read_vector(config.background));
    std::optional<EdgeField> weights;
    if (config.weights)
        weights = weights_from_values(config.grid, NeighborStencil::fan_plane(), read_vector(*config.weights));
    validate_problem(a, m, config.grid);
    return LoadedProblem{std::move(config), std::move(a), std::move(m), std::move(weights)};
}

namespace {

SolveOptions solve_options(const LoadedProblem& p, const RunOverrides& overrides) {
    SolveOptions opts;
    opts.weights = p.weights;
    opts.threads = std::max(1u, overrides.threads);
    return opts;
}

json trace_json(const TraceRecord& t) {
    return json{{"iter", t.iter},         {"objective", t.objective},   {"nll", t.nll},
                {"penalty", t.penalty}, {"primal_res", t.primal_res}, {"dual_res", t.dual_res}};
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }
}

}  // namespace

SweepResult run_sweep(const SparseSystemMatrix& a, const MeasurementSet& m, const SolverConfig& base,
                      const HyperImage& truth, std::span<const double> betas, const SolveOptions& options) {
    if (betas.empty()) throw ValidationError("sweep needs at least one beta");
    std::vector<double> sorted(betas.begin(), betas.end());
    std::sort(sorted.begin(), sorted.end());

    const auto truth_profile = mtp_extract(truth);
    SweepResult result{{}, 0, HyperImage(truth.grid())};
    for (double beta : sorted) {
        SolverConfig config = base;
        config.beta = beta;
        SolveResult solved = solve(a, m, truth.grid(), config, options);
        SweepRow row;
        row.beta = beta;
        row.spatial_rmse = scatter::spatial_rmse(solved.image, truth);
        row.spectral_rmse = scatter::spectral_rmse(solved.image, truth);
        row.objective = solved.traces.empty() ? 0.0 : solved.traces.back().objective;
        row.mtp_cosine = cosine_similarity(solved.image.profile(truth_profile.spatial_bin), truth_profile.spectrum);
        if (result.rows.empty() || row.spatial_rmse < result.rows[result.best].spatial_rmse) {
            result.best = result.rows.size();
            result.best_image = solved.image;
        }
        result.rows.push_back(row);
    }
    result.rows[result.best].best = true;
    return result;
}

int cmd_reconstruct(const fs::path& config_path, const RunOverrides& overrides, std::ostream& out,
                    std::ostream& err) {
    return guarded(err, [&] {
        const LoadedProblem p = load_problem(config_path, overrides);
        const auto start = std::chrono::steady_clock::now();
        const SolveResult result = solve(p.a, p.m, p.config.grid, p.config.solver, solve_options(p, overrides));
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        const fs::path dir = p.config.output_dir;
        fs::create_directories(dir);
        write_image(dir / "image.csv", result.image);
        write_trace(dir / "trace.csv", result.traces);

        json summary;
        summary["config"] = to_json(p.config);
        summary["iterations"] = result.traces.size();
        summary["converged"] = result.converged;
        summary["final"] = result.traces.empty() ? json(nullptr) : trace_json(result.traces.back());
        summary["wall_time_s"] = wall;
        summary["threads"] = std::max(1u, overrides.threads);
        summary["unobservable_voxels"] = result.diagnostics.unobservable_voxels;
        std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';

        for (std::size_t j : result.diagnostics.unobservable_voxels)
            err << "warning: voxel " << j << " is unobservable (empty system-matrix column)\n";
        out << "reconstruct: " << result.traces.size() << " iterations, objective "
            << format_real(result.traces.back().objective) << ", outputs in " << dir.string() << '\n';
        return static_cast<int>(kExitOk);
    });
}

int cmd_sweep(const fs::path& config_path, std::span<const double> betas, const RunOverrides& overrides,
              std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (betas.empty()) throw ValidationError("usage: sweep requires a non-empty --betas list");
        const LoadedProblem p = load_problem(config_path, overrides);
        if (!p.config.truth) throw ValidationError("sweep needs a ground-truth image: config field \"truth\" is missing");
        const HyperImage truth = read_image(*p.config.truth);
        if (!(truth.grid() == p.config.grid))
            throw ValidationError("truth image grid does not match config grid: " + p.config.truth->string());

        const SweepResult result = run_sweep(p.a, p.m, p.config.solver, truth, betas, solve_options(p, overrides));

        const fs::path dir = p.config.output_dir;
        fs::create_directories(dir);
        {
            std::ofstream csv(dir / "sweep.csv");
            csv << "beta,spatial_rmse,spectral_rmse,objective,best\n";
            for (const auto& r : result.rows)
                csv << format_real(r.beta) << ',' << format_real(r.spatial_rmse) << ','
                    << format_real(r.spectral_rmse) << ',' << format_real(r.objective) << ',' << (r.best ? 1 : 0)
                    << '\n';
        }
        write_image(dir / "best_image.csv", result.best_image);

        json summary;
        summary["config"] = to_json(p.config);
        summary["best_beta"] = result.rows[result.best].beta;
        json rows = json::array();
        for (const auto& r : result.rows)
            rows.push_back({{"beta", r.beta},
                            {"spatial_rmse", r.spatial_rmse},
                            {"spectral_rmse", r.spectral_rmse},
                            {"objective", r.objective},
                            {"mtp_cosine_similarity", r.mtp_cosine},
                            {"best", r.best}});
        summary["rows"] = rows;
        std::ofstream(dir / "sweep_summary.json") << summary.dump(2) << '\n';

        out << "sweep: " << result.rows.size() << " betas, best beta " << format_real(result.rows[result.best].beta)
            << " (spatial RMSE " << format_real(result.rows[result.best].spatial_rmse) << ")\n";
        return static_cast<int>(kExitOk);
    });
}

int cmd_simulate(const FixtureSpec& spec, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Fixture fx = make_fixture(spec);
        write_fixture(fx, out_dir);
        out << "simulate: wrote " << fx.a.rows() << " x " << fx.a.cols() << " fixture to " << out_dir.string()
            << '\n';
        return static_cast<int>(kExitOk);
    });
}

int cmd_analyze(const fs::path& image_path, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const HyperImage image = read_image(image_path);
        const ImageGrid& g = image.grid();
        const auto spatial = spatial_distribution(image);
        const auto display = display_transform(spatial);
        const auto mtp = mtp_extract(image);

        fs::create_directories(out_dir);
        {
            std::ofstream csv(out_dir / "spatial.csv");
            csv << "s,iz,iy,spatial,display\n";
            for (std::size_t s = 0; s < spatial.size(); ++s)
                csv << s << ',' << g.iz_of(s) << ',' << g.iy_of(s) << ',' << format_real(spatial[s]) << ','
                    << format_real(display[s]) << '\n';
        }
        {
            std::ofstream csv(out_dir / "mtp.csv");
            csv << "q_index,q,value\n";
            for (std::size_t q = 0; q < mtp.spectrum.size(); ++q)
                csv << q << ',' << format_real(g.q_center(q)) << ',' << format_real(mtp.spectrum[q]) << '\n';
        }
        json summary{{"image", image_path.string()},
                     {"peak_spatial_bin", mtp.spatial_bin},
                     {"peak_iz", g.iz_of(mtp.spatial_bin)},
                     {"peak_iy", g.iy_of(mtp.spatial_bin)},
                     {"peak_spatial_value", spatial[mtp.spatial_bin]}};
        std::ofstream(out_dir / "analysis.json") << summary.dump(2) << '\n';
        out << "analyze: peak at spatial bin " << mtp.spatial_bin << ", outputs in " << out_dir.string() << '\n';
        return static_cast<int>(kExitOk);
    });
}

}  // namespace scatter
