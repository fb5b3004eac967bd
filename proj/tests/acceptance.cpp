// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oracle.hpp"
#include "scatter/analysis.hpp"
#include "scatter/commands.hpp"
#include "scatter/likelihood.hpp"
#include "scatter/regularizers.hpp"
#include "scatter/simulate.hpp"
#include "scatter/solver.hpp"
#include "test_support.hpp"

using namespace scatter;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double norm(std::span<const double> v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    return std::sqrt(sq);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
    return acc;
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

SolverConfig run_to_completion(double beta, std::size_t iters) {
    SolverConfig c;
    c.beta = beta;
    c.outer_iters = iters;
    c.tol_rel_primal = 1e-300;
    c.tol_rel_obj = 1e-300;
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// 1. beta = 0 and w = 0: 50 solver iterations against the textbook MLEM formula.
Outcome mlem_reduction() {
    auto inst = testing_support::make_instance(6, 6, 4, 2024);
    SolveOptions opts;
    const DiffOperator op(inst.grid, opts.stencil);
    opts.weights = op.make_field(0.0);
    const SolveResult res = solve(inst.a, inst.m, inst.grid, run_to_completion(0.0, 50), opts);

    const auto dense = oracle::dense_from_sparse(inst.a);
    const auto y = inst.m.counts();
    const auto r = inst.m.background();
    double excess = 0.0, sigma = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) excess += std::max(y[i] - r[i], 0.0);
    for (const auto& row : dense)
        for (double v : row) sigma += v;
    std::vector<double> f(inst.grid.num_voxels(), std::max(excess / sigma, 1e-6));
    for (int it = 0; it < 50; ++it) f = oracle::mlem_step(dense, y, r, f);

    double worst = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j)
        worst = std::max(worst, std::abs(res.image.values()[j] - f[j]) / std::abs(f[j]));
    return {res.traces.size() == 50 && worst <= 1e-12, "max rel diff " + fmt(worst)};
}

// 2. EM and De Pierro surrogates majorize their targets and are tangent at f^n.
Outcome surrogate_majorization() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst_slack = std::numeric_limits<double>::infinity(), worst_value = 0.0, worst_grad = 0.0;
    for (int inst_id = 0; inst_id < 100; ++inst_id) {
        std::size_t nz, ny, nq;
        do {
            nz = 1 + rng() % 4;
            ny = 1 + rng() % 4;
            nq = 1 + rng() % 4;
        } while (nz * ny * nq > 48);
        const ImageGrid g = build_grid(nz, ny, nq, 1.0 + unit(rng), 1.0 + unit(rng), 0.0, 1.0);
        const std::size_t J = g.num_voxels();
        const std::size_t I = 2 * J;
        const auto a = make_system(g, I, 0.3, 1000 + inst_id);
        const auto r = random_vector(rng, I, 0.1, 2.0);
        std::vector<double> y(I);
        for (double& v : y) v = std::floor(30.0 * unit(rng));
        const MeasurementSet m(y, r);
        const auto f_n = random_vector(rng, J, 0.2, 5.0);

        // EM surrogate vs NLL, both evaluated independently with dense products
        const auto dense = oracle::dense_from_sparse(a);
        auto nll = [&](std::span<const double> x) {
            auto ybar = oracle::matvec(dense, x);
            for (std::size_t i = 0; i < I; ++i) ybar[i] += r[i];
            return oracle::nll_extended(y, ybar);
        };
        const SurrogateCoeffs em = em_coeffs(a, m, f_n);
        const double nll_n = nll(f_n);
        const double offset = nll_n - em_surrogate_value(em, f_n);
        auto em_value = [&](std::span<const double> x) {
            double acc = offset;
            for (std::size_t j = 0; j < J; ++j) acc += em.sigma[j] * x[j] - (em.e[j] > 0.0 ? em.e[j] * std::log(x[j]) : 0.0);
            return acc;
        };
        worst_value = std::max(worst_value, std::abs(em_value(f_n) - nll_n) / std::abs(nll_n));
        {
            auto ybar = oracle::matvec(dense, f_n);
            std::vector<double> ratio(I);
            for (std::size_t i = 0; i < I; ++i) ratio[i] = 1.0 - y[i] / (ybar[i] + r[i]);
            const auto grad = oracle::matvec_transpose(dense, ratio);
            std::vector<double> diff(J);
            for (std::size_t j = 0; j < J; ++j) diff[j] = (em.sigma[j] - em.e[j] / f_n[j]) - grad[j];
            worst_grad = std::max(worst_grad, norm(diff) / std::max(norm(grad), 1e-300));
        }

        // De Pierro quadratic vs the exact coupling
        const DiffOperator op(g, NeighborStencil::fan_plane());
        const std::size_t E = op.num_edges();
        const EdgeField w(g.num_spatial(), nq, 2, random_vector(rng, E, 0.1, 2.0));
        const EdgeField d(g.num_spatial(), nq, 2, random_vector(rng, E, -3.0, 3.0));
        const EdgeField c(g.num_spatial(), nq, 2, random_vector(rng, E, -1.0, 1.0));
        const double lambda = 0.1 + 5.0 * unit(rng);
        const auto dg = oracle::dense_difference_matrix(g, op.stencil());
        auto coupling = [&](std::span<const double> x) {
            const auto gx = oracle::matvec(dg, x);
            double sq = 0.0;
            for (std::size_t k = 0; k < E; ++k) {
                const double t = d.values()[k] - w.values()[k] * gx[k] - c.values()[k];
                sq += t * t;
            }
            return 0.5 * lambda * sq;
        };
        const QuadSurrogate quad = quad_surrogate(op, f_n, d, c, w, lambda);
        const double coup_n = coupling(f_n);
        worst_value = std::max(worst_value, std::abs(quad_surrogate_value(quad, f_n, f_n)) / std::max(coup_n, 1e-300));
        {
            const auto fd = oracle::fd_gradient(coupling, f_n, 1e-4);
            std::vector<double> diff(J);
            for (std::size_t j = 0; j < J; ++j) diff[j] = quad.g[j] - fd[j];
            worst_grad = std::max(worst_grad, norm(diff) / std::max(norm(fd), 1e-300));
        }

        for (int trial = 0; trial < 1000; ++trial) {
            const auto x = random_vector(rng, J, 1e-3, 10.0);
            const double obj_em = nll(x);
            worst_slack = std::min(worst_slack, (em_value(x) - obj_em) / std::abs(obj_em));
            const double obj_q = coupling(x);
            worst_slack = std::min(worst_slack, (coup_n + quad_surrogate_value(quad, x, f_n) - obj_q) /
                                                    std::max(std::abs(obj_q), 1e-300));
        }
    }
    const bool pass = worst_slack >= -1e-10 && worst_value <= 1e-8 && worst_grad <= 1e-8;
    return {pass, "min rel slack " + fmt(worst_slack) + ", value err " + fmt(worst_value) + ", grad err " +
                      fmt(worst_grad)};
}

// 3. Closed-form block shrinkage against direct numerical minimization.
Outcome prox_exactness() {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t len = 1 + rng() % 32;
        std::vector<double> v(len);
        for (double& x : v) x = 2.0 * unit(rng) - 1.0;
        const double ratio = std::pow(10.0, -1.0 + 2.0 * unit(rng));  // ||v|| / tau in [0.1, 10]
        const double tau = norm(v) / ratio;
        const EdgeField closed = block_shrink(EdgeField(1, 1, len, v), tau);
        const auto numeric = oracle::prox_numeric(v, tau);
        for (std::size_t k = 0; k < len; ++k) worst = std::max(worst, std::abs(closed.values()[k] - numeric[k]));
    }
    return {worst <= 1e-6, "max abs diff " + fmt(worst)};
}

// 4. Difference-operator adjoint identity and sparse vs dense projection.
Outcome operator_checks() {
    double worst_adj = 0.0, worst_proj = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        const ImageGrid g = build_grid(1 + rng() % 8, 1 + rng() % 8, 1 + rng() % 8, 5.0, 1.5, 0.05, 0.4475);
        const DiffOperator op(g, NeighborStencil::fan_plane());
        const auto f = random_vector(rng, g.num_voxels(), -1.0, 1.0);
        const EdgeField e(g.num_spatial(), g.num_q(), 2, random_vector(rng, op.num_edges(), -1.0, 1.0));
        EdgeField gf = op.make_field();
        op.apply(f, gf);
        std::vector<double> gte(g.num_voxels());
        op.adjoint(e, gte);
        const double scale = norm(gf.values()) * norm(e.values());
        worst_adj = std::max(worst_adj, std::abs(dot(gf.values(), e.values()) - dot(f, gte)) / std::max(scale, 1e-300));

        const auto a = make_system(g, 2 * g.num_voxels(), 0.2, seed);
        const auto x = random_vector(rng, g.num_voxels(), 0.0, 10.0);
        const auto r = random_vector(rng, a.rows(), 0.0, 1.0);
        const auto ybar = forward_project(a, x, r);
        const auto ref = oracle::matvec(oracle::dense_from_sparse(a), x);
        for (std::size_t i = 0; i < ref.size(); ++i)
            worst_proj = std::max(worst_proj, std::abs(ybar[i] - (ref[i] + r[i])) / std::abs(ref[i] + r[i]));
    }
    return {worst_adj <= 1e-10 && worst_proj <= 1e-12,
            "adjoint rel err " + fmt(worst_adj) + ", projection rel err " + fmt(worst_proj)};
}

// 5. ADMM optimum against the projected-gradient reference on a small instance.
Outcome oracle_equivalence() {
    auto inst = testing_support::make_instance(4, 3, 4, 5);
    const EdgeField w = default_weights(inst.grid, NeighborStencil::fan_plane());
    double worst = 0.0;
    std::string detail;
    for (Regularizer reg : {Regularizer::group_tv, Regularizer::standard_tv}) {
        for (double beta : {0.01, 0.1, 1.0}) {
            SolverConfig config;
            config.beta = beta;
            config.regularizer = reg;
            config.outer_iters = 500;
            const SolveResult res = solve(inst.a, inst.m, inst.grid, config);
            const auto ref = oracle::reference_solve(inst.a, inst.m, w.values(), beta, inst.grid, reg);
            const double rel = std::abs(res.traces.back().objective - ref.objective) / std::abs(ref.objective);
            worst = std::max(worst, rel);
            detail += (detail.empty() ? "" : ", ") + to_string(reg) + "@" + fmt(beta) + " " + fmt(rel);
        }
    }
    return {worst <= 0.005, "rel gap " + detail};
}

// 6. MM descent within every image update and shrinking primal residual.
Outcome monotone_descent() {
    const Fixture fx = make_fixture(FixtureSpec{});
    std::size_t steps = 0, violations = 0;
    double worst = 0.0;
    SolveOptions opts;
    opts.observer = [&](const InnerStep& s) {
        ++steps;
        const double excess = (s.after - s.before) / std::abs(s.before);
        worst = std::max(worst, excess);
        violations += excess > 1e-10;
    };
    const SolveResult res = solve(fx.a, fx.m, fx.phantom.grid, run_to_completion(1.0, 200), opts);
    const double p20 = res.traces[19].primal_res, p200 = res.traces[199].primal_res;
    const bool pass = res.traces.size() == 200 && steps == 200 && violations == 0 && p200 < p20;
    return {pass, std::to_string(steps) + " inner steps, max rel increase " + fmt(worst) + ", primal res " +
                      fmt(p20) + " at 20 -> " + fmt(p200) + " at 200"};
}

// 7. Spectral accuracy of group TV vs standard TV, each at its spatially best beta.
Outcome group_vs_standard() {
    const Fixture fx = make_fixture(FixtureSpec{});
    const std::vector<double> betas{1e-4, 3.16e-4, 1e-3, 3.16e-3, 1e-2, 3.16e-2, 1e-1, 3.16e-1, 1.0};
    std::string detail;
    double spectral[2] = {0.0, 0.0};
    int k = 0;
    for (Regularizer reg : {Regularizer::group_tv, Regularizer::standard_tv}) {
        // each beta runs until the default stopping rule fires
        SolverConfig base;
        base.regularizer = reg;
        base.outer_iters = 20000;
        const SweepResult sweep = run_sweep(fx.a, fx.m, base, fx.phantom.image, betas);
        const SweepRow& best = sweep.rows[sweep.best];
        spectral[k++] = best.spectral_rmse;
        detail += (detail.empty() ? "" : "; ") + to_string(reg) + " beta " + fmt(best.beta) + " spatial " +
                  fmt(best.spatial_rmse) + " spectral " + fmt(best.spectral_rmse);
    }
    return {spectral[0] <= spectral[1], detail};
}

// 8. Full-size geometry: bookkeeping and a short solve without numerical failure.
Outcome full_geometry() {
    const ImageGrid g = build_grid(41, 9, 54, 5.0, 1.5, 0.05, 0.4475);
    const bool sizes = g.num_spatial() == 369 && g.num_voxels() == 19926 && std::abs(g.spectral_step() - 0.0075) <= 1e-15;

    const std::vector<double> centers{14.0, 34.0}, widths{3.0, 3.0};
    const Phantom ph = make_phantom(g, PhantomSpec{{gaussian_mixture_template(54, centers, widths)},
                                                   {Region{16, 24, 3, 6, 0, 300.0}}});
    const auto a = make_system(g, 8192, 0.01, 8);
    const std::vector<double> r(a.rows(), 2.6);
    const MeasurementSet m(poisson_sample(forward_project(a, ph.image.values(), r), 9), r);
    SolverConfig config = run_to_completion(1.0, 10);
    bool finite = true;
    std::size_t iters = 0;
    try {
        const SolveResult res = solve(a, m, g, config);
        iters = res.traces.size();
        for (double v : res.image.values()) finite = finite && std::isfinite(v);
    } catch (const NumericalError& e) {
        return {false, std::string("numerical failure: ") + e.what()};
    }
    return {sizes && finite && iters == 10,
            "S=" + std::to_string(g.num_spatial()) + " J=" + std::to_string(g.num_voxels()) + " step=" +
                format_real(g.spectral_step()) + " I=" + std::to_string(a.rows()) + " nnz=" +
                std::to_string(a.nnz()) + " iterations=" + std::to_string(iters)};
}

// 9. Byte-identical outputs for 1 and 8 threads.
Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / "scatter_acceptance_determinism";
    fs::remove_all(dir);
    FixtureSpec spec;
    spec.nz = 32;
    spec.ny = 16;
    spec.density = 0.01;
    std::ostringstream out, err;
    if (cmd_simulate(spec, dir, out, err) != kExitOk) return {false, "fixture: " + err.str()};
    auto cfg = nlohmann::json::parse(slurp(dir / "config.json"));
    cfg["outer_iters"] = 20;
    std::ofstream(dir / "config.json") << cfg.dump(2);

    std::string image[2], trace[2];
    const unsigned threads[2] = {1, 8};
    for (int k = 0; k < 2; ++k) {
        RunOverrides o;
        o.threads = threads[k];
        o.deterministic = true;
        if (cmd_reconstruct(dir / "config.json", o, out, err) != kExitOk) return {false, "run: " + err.str()};
        image[k] = slurp(dir / "output" / "image.csv");
        trace[k] = slurp(dir / "output" / "trace.csv");
    }
    fs::remove_all(dir);
    const bool pass = !image[0].empty() && image[0] == image[1] && trace[0] == trace[1];
    return {pass, std::string("image ") + (image[0] == image[1] ? "identical" : "differs") + ", trace " +
                      (trace[0] == trace[1] ? "identical" : "differs")};
}

struct Criterion {
    int id;
    const char* name;
    double time_limit_s;  // <= 0 means no limit
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "MLEM reduction", 1.0, mlem_reduction},
        {2, "surrogate majorization", 10.0, surrogate_majorization},
        {3, "prox exactness", 5.0, prox_exactness},
        {4, "adjoint and operator checks", 5.0, operator_checks},
        {5, "oracle equivalence", 120.0, oracle_equivalence},
        {6, "monotone descent", 0.0, monotone_descent},
        {7, "group vs standard TV", 300.0, group_vs_standard},
        {8, "full-size geometry", 120.0, full_geometry},
        {9, "determinism", 0.0, determinism},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = c.time_limit_s <= 0.0 || secs < c.time_limit_s;
        const bool pass = o.pass && in_time;
        failures += !pass;
        std::printf("criterion %d %s: %s (%s; %.2f s%s)\n", c.id, c.name, pass ? "PASS" : "FAIL", o.detail.c_str(),
                    secs, in_time ? "" : ", over time limit");
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
