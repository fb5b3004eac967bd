#include "scatter/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "scatter/likelihood.hpp"
#include "scatter/regularizers.hpp"

namespace scatter {

namespace {

constexpr double kInitFloor = 1e-6;
constexpr std::size_t kObjectiveWindow = 5;

double norm2(std::span<const double> v, const Exec& exec) {
    return std::sqrt(parallel_sum(exec, v.size(), [&](std::size_t i0, std::size_t i1) {
        double acc = 0.0;
        for (std::size_t i = i0; i < i1; ++i) acc += v[i] * v[i];
        return acc;
    }));
}

void check_finite(std::span<const double> v, const char* what, std::size_t iter) {
    for (std::size_t j = 0; j < v.size(); ++j)
        if (!std::isfinite(v[j]))
            throw NumericalError("non-finite " + std::string(what) + " at index " + std::to_string(j) +
                                 " in iteration " + std::to_string(iter));
}

}  // namespace

double coupling_value(const DiffOperator& op, std::span<const double> f, const EdgeField& d, const EdgeField& c,
                      const EdgeField& w, double lambda, const Exec& exec) {
    EdgeField r = op.make_field();
    op.apply_weighted(f, w, r, exec);
    const auto rv = r.values();
    const auto dv = d.values();
    const auto cv = c.values();
    const double sq = parallel_sum(exec, rv.size(), [&](std::size_t k0, std::size_t k1) {
        double acc = 0.0;
        for (std::size_t k = k0; k < k1; ++k) {
            const double t = rv[k] + cv[k] - dv[k];
            acc += t * t;
        }
        return acc;
    });
    return 0.5 * lambda * sq;
}

QuadSurrogate quad_surrogate(const DiffOperator& op, std::span<const double> f_n, const EdgeField& d,
                             const EdgeField& c, const EdgeField& w, double lambda, const Exec& exec) {
    const ImageGrid& grid = op.grid();
    const std::size_t Q = grid.num_q();
    const std::size_t N = op.num_dirs();

    EdgeField resid = op.make_field();
    op.apply_weighted(f_n, w, resid, exec);
    auto rv = resid.values();
    const auto dv = d.values();
    const auto cv = c.values();
    const auto wv = w.values();
    parallel_for(exec, rv.size(), [&](std::size_t k0, std::size_t k1) {
        for (std::size_t k = k0; k < k1; ++k) rv[k] = wv[k] * (rv[k] + cv[k] - dv[k]);
    });

    QuadSurrogate out;
    out.g.assign(grid.num_voxels(), 0.0);
    op.adjoint(resid, out.g, exec);
    out.alpha.assign(grid.num_voxels(), 0.0);
    parallel_for(exec, grid.num_spatial(), [&](std::size_t s0, std::size_t s1) {
        for (std::size_t s = s0; s < s1; ++s) {
            for (std::size_t q = 0; q < Q; ++q) {
                // Edge (s, q, p) touches voxel (s, q) and, when inside the
                // grid, voxel (forward_neighbor(s, p), q).
                double acc = 0.0;
                for (std::size_t p = 0; p < N; ++p) {
                    const double own = w(s, q, p);
                    acc += own * own;
                    const std::size_t t = op.backward_neighbor(s, p);
                    if (t != DiffOperator::kOutside) {
                        const double other = w(t, q, p);
                        acc += other * other;
                    }
                }
                const std::size_t j = s * Q + q;
                out.alpha[j] = 2.0 * lambda * acc;
                out.g[j] *= lambda;
            }
        }
    });
    return out;
}

double quad_surrogate_value(const QuadSurrogate& quad, std::span<const double> f, std::span<const double> f_n) {
    double acc = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) {
        const double delta = f[j] - f_n[j];
        acc += quad.g[j] * delta + 0.5 * quad.alpha[j] * delta * delta;
    }
    return acc;
}

double voxel_update(double e, double sigma, double alpha, double g, double f_n) {
    if (alpha > 0.0) {
        // Stationarity: alpha f^2 + b f - e = 0 with b = sigma + g - alpha f_n.
        const double b = sigma + g - alpha * f_n;
        if (e > 0.0) {
            const double disc = std::sqrt(b * b + 4.0 * alpha * e);
            return b >= 0.0 ? 2.0 * e / (b + disc) : (disc - b) / (2.0 * alpha);
        }
        return std::max(-b / alpha, 0.0);
    }
    const double slope = sigma + g;
    if (e > 0.0) {
        if (slope > 0.0) return e / slope;
    } else if (slope >= 0.0) {
        return 0.0;
    }
    throw UnboundedVoxelError("voxel update is unbounded: e = " + std::to_string(e) +
                              ", sigma = " + std::to_string(sigma) + ", g = " + std::to_string(g) +
                              ", alpha = 0");
}

double penalized_objective(const ProblemView& p, std::span<const double> f, Regularizer reg, double beta,
                           const Exec& exec) {
    const auto ybar = forward_project(p.a, f, p.m.background(), exec);
    double value = neg_log_likelihood(p.m.counts(), ybar, exec);
    if (beta > 0.0) {
        EdgeField u = p.op.make_field();
        p.op.apply_weighted(f, p.w, u, exec);
        value += beta * penalty_from_edges(reg, u, exec);
    }
    return value;
}

double image_subobjective(const ProblemView& p, std::span<const double> f, const EdgeField& d, const EdgeField& c,
                          double lambda, const Exec& exec) {
    const auto ybar = forward_project(p.a, f, p.m.background(), exec);
    return neg_log_likelihood(p.m.counts(), ybar, exec) + coupling_value(p.op, f, d, c, p.w, lambda, exec);
}

SolverState initial_state(const ProblemView& p, const Exec& exec) {
    const auto y = p.m.counts();
    const auto r = p.m.background();
    double excess = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) excess += std::max(y[i] - r[i], 0.0);
    double sigma_total = 0.0;
    for (double s : p.a.column_sums()) sigma_total += s;
    if (!(sigma_total > 0.0)) throw ValidationError("system matrix has no positive column sums");

    SolverState state;
    state.f.assign(p.a.cols(), std::max(excess / sigma_total, kInitFloor));
    state.ybar = forward_project(p.a, state.f, r, exec);
    state.d = p.op.make_field();
    p.op.apply_weighted(state.f, p.w, state.d, exec);
    state.c = p.op.make_field();
    return state;
}

void image_update(SolverState& state, const ProblemView& p, const SolverConfig& config, const Exec& exec,
                  const InnerObserver& observer) {
    const double lambda = config.effective_lambda();
    const auto y = p.m.counts();
    auto& f = state.f;

    for (std::size_t n = 0; n < config.inner_iters; ++n) {
        double before = 0.0;
        if (observer)
            before = neg_log_likelihood(y, state.ybar, exec) +
                     coupling_value(p.op, f, state.d, state.c, p.w, lambda, exec);

        const SurrogateCoeffs em = em_coeffs_from_mean(p.a, y, state.ybar, f, exec);
        const QuadSurrogate quad = quad_surrogate(p.op, f, state.d, state.c, p.w, lambda, exec);
        parallel_for(exec, f.size(), [&](std::size_t j0, std::size_t j1) {
            for (std::size_t j = j0; j < j1; ++j)
                f[j] = voxel_update(em.e[j], em.sigma[j], quad.alpha[j], quad.g[j], f[j]);
        });
        state.ybar = forward_project(p.a, f, p.m.background(), exec);

        if (observer) {
            const double after = neg_log_likelihood(y, state.ybar, exec) +
                                 coupling_value(p.op, f, state.d, state.c, p.w, lambda, exec);
            observer(InnerStep{state.k, n, before, after});
        }
    }
}

void admm_step(SolverState& state, const ProblemView& p, const SolverConfig& config, const Exec& exec,
               const InnerObserver& observer) {
    const double lambda = config.effective_lambda();
    const double tau = config.beta / lambda;

    image_update(state, p, config, exec, observer);
    check_finite(state.f, "image value", state.k);

    EdgeField u = p.op.make_field();
    p.op.apply_weighted(state.f, p.w, u, exec);

    // v = u + c, shrunk in place to become the new d.
    EdgeField d_new = u;
    {
        auto dv = d_new.values();
        const auto cv = state.c.values();
        for (std::size_t k = 0; k < dv.size(); ++k) dv[k] += cv[k];
    }
    shrink_in_place(config.regularizer, d_new, tau, exec);

    EdgeField primal = p.op.make_field();
    EdgeField d_change = p.op.make_field();
    {
        auto cv = state.c.values();
        auto pv = primal.values();
        auto dc = d_change.values();
        const auto uv = u.values();
        const auto dn = d_new.values();
        const auto dold = state.d.values();
        const auto wv = p.w.values();
        for (std::size_t k = 0; k < cv.size(); ++k) {
            cv[k] += uv[k] - dn[k];
            pv[k] = uv[k] - dn[k];
            dc[k] = wv[k] * (dn[k] - dold[k]);
        }
    }
    std::vector<double> dual(p.a.cols(), 0.0);
    p.op.adjoint(d_change, dual, exec);
    state.d = std::move(d_new);

    TraceRecord rec;
    rec.iter = state.k + 1;
    rec.nll = neg_log_likelihood(p.m.counts(), state.ybar, exec);
    rec.penalty = penalty_from_edges(config.regularizer, u, exec);
    rec.objective = rec.nll + config.beta * rec.penalty;
    rec.primal_res = norm2(primal.values(), exec);
    rec.dual_res = lambda * norm2(dual, exec);
    if (!std::isfinite(rec.objective) || !std::isfinite(rec.primal_res) || !std::isfinite(rec.dual_res))
        throw NumericalError("non-finite objective or residual in iteration " + std::to_string(rec.iter));
    check_finite(state.c.values(), "dual variable", state.k);

    state.traces.push_back(rec);
    ++state.k;
}

SolveResult solve(const SparseSystemMatrix& a, const MeasurementSet& m, const ImageGrid& grid,
                  const SolverConfig& config, const SolveOptions& options) {
    config.validate();
    ProblemDiagnostics diag = validate_problem(a, m, grid);
    if (!diag.infeasible_rows.empty())
        throw InfeasibleMeanError("measurement " + std::to_string(diag.infeasible_rows.front()) +
                                  " has a positive count but an empty system-matrix row and zero background");

    const DiffOperator op(grid, options.stencil);
    const EdgeField w = options.weights ? *options.weights : default_weights(grid, options.stencil);
    if (!w.same_shape(op.make_field())) throw ValidationError("weight field shape does not match grid and stencil");

    const ProblemView view{a, m, op, w};
    const Exec exec{std::max(1u, options.threads), config.deterministic_reductions};

    SolverState state = initial_state(view, exec);
    bool converged = false;
    EdgeField u = op.make_field();
    while (state.k < config.outer_iters) {
        admm_step(state, view, config, exec, options.observer);

        const auto& tr = state.traces;
        if (tr.size() > kObjectiveWindow) {
            op.apply_weighted(state.f, w, u, exec);
            const double rel_primal = tr.back().primal_res / std::max(norm2(u.values(), exec), 1e-300);
            const double obj = tr.back().objective;
            const double prev = tr[tr.size() - 1 - kObjectiveWindow].objective;
            const double rel_obj = std::abs(obj - prev) / std::max(std::abs(obj), 1e-300);
            if (rel_primal <= config.tol_rel_primal && rel_obj <= config.tol_rel_obj) {
                converged = true;
                break;
            }
        }
    }

    return SolveResult{HyperImage(grid, std::move(state.f)), std::move(state.traces), converged, std::move(diag)};
}

}  // namespace scatter
