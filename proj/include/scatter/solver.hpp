#pragma once

// Penalized-likelihood reconstruction
//
//   minimize_{f >= 0, d}  NLL(f) + beta * R(d)   subject to  d = w .* (G f)
//
// by split Bregman / scaled ADMM:
//
//   f <- argmin_f NLL(f) + lambda/2 || d - w .* (G f) - c ||^2      (image update)
//   d <- prox_{(beta/lambda) R}( w .* (G f) + c )                   (shrinkage)
//   c <- c + w .* (G f) - d                                         (dual update)
//
// The image update is solved approximately by majorize-minimize: the EM
// surrogate majorizes NLL, and De Pierro's two-point convex decomposition
// majorizes the quadratic coupling, giving one independent scalar problem per
// voxel with a closed-form nonnegative root.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "scatter/diffop.hpp"
#include "scatter/grid.hpp"
#include "scatter/parallel.hpp"

namespace scatter {

struct TraceRecord {
    std::size_t iter = 0;
    double objective = 0.0;  // NLL(f) + beta * R(w .* G f)
    double nll = 0.0;
    double penalty = 0.0;     // R(w .* G f)
    double primal_res = 0.0;  // || w .* G f - d ||
    double dual_res = 0.0;    // lambda || G^T (w .* (d_new - d_old)) ||
};

/// Non-owning bundle of the fixed problem data. All referenced objects must
/// outlive the view.
struct ProblemView {
    const SparseSystemMatrix& a;
    const MeasurementSet& m;
    const DiffOperator& op;
    const EdgeField& w;
};

/// Separable quadratic majorizer of the coupling term around f^n:
///   sum_j g_j (f_j - f^n_j) + alpha_j / 2 (f_j - f^n_j)^2.
struct QuadSurrogate {
    std::vector<double> alpha;
    std::vector<double> g;
};

/// lambda/2 || w .* (G f) + c - d ||^2
double coupling_value(const DiffOperator& op, std::span<const double> f, const EdgeField& d,
                      const EdgeField& c, const EdgeField& w, double lambda, const Exec& exec = {});

/// g = lambda G^T (w .* (w .* G f^n + c - d)),  alpha_j = 2 lambda sum_{edges e touching j} w_e^2.
QuadSurrogate quad_surrogate(const DiffOperator& op, std::span<const double> f_n, const EdgeField& d,
                             const EdgeField& c, const EdgeField& w, double lambda, const Exec& exec = {});

double quad_surrogate_value(const QuadSurrogate& quad, std::span<const double> f, std::span<const double> f_n);

/// Minimizer over f >= 0 of  sigma f - e ln f + g (f - f_n) + alpha/2 (f - f_n)^2.
/// Throws UnboundedVoxelError when the scalar problem has no minimizer.
double voxel_update(double e, double sigma, double alpha, double g, double f_n);

/// NLL(f) + beta * R(w .* G f)
double penalized_objective(const ProblemView& p, std::span<const double> f, Regularizer reg, double beta,
                           const Exec& exec = {});

/// Objective of the image update: NLL(f) + lambda/2 || d - w .* G f - c ||^2.
double image_subobjective(const ProblemView& p, std::span<const double> f, const EdgeField& d,
                          const EdgeField& c, double lambda, const Exec& exec = {});

struct SolverState {
    std::vector<double> f;
    std::vector<double> ybar;  // A f + r, kept in sync with f
    EdgeField d;
    EdgeField c;
    std::size_t k = 0;
    std::vector<TraceRecord> traces;
};

/// Sub-objective values around one inner MM iteration of the image update.
struct InnerStep {
    std::size_t outer = 0;
    std::size_t inner = 0;
    double before = 0.0;
    double after = 0.0;
};
using InnerObserver = std::function<void(const InnerStep&)>;

/// f0 = max(sum_i max(y_i - r_i, 0) / sum_j sigma_j, 1e-6) everywhere, d0 = w .* G f0, c0 = 0.
SolverState initial_state(const ProblemView& p, const Exec& exec = {});

/// Runs config.inner_iters MM passes on state.f for the current d and c.
void image_update(SolverState& state, const ProblemView& p, const SolverConfig& config, const Exec& exec = {},
                  const InnerObserver& observer = {});

/// One full ADMM iteration; appends a trace record.
void admm_step(SolverState& state, const ProblemView& p, const SolverConfig& config, const Exec& exec = {},
               const InnerObserver& observer = {});

struct SolveOptions {
    NeighborStencil stencil = NeighborStencil::fan_plane();
    /// Overrides default_weights when set.
    std::optional<EdgeField> weights;
    unsigned threads = 1;
    InnerObserver observer;
};

struct SolveResult {
    HyperImage image;
    std::vector<TraceRecord> traces;
    bool converged = false;
    ProblemDiagnostics diagnostics;
};

/// Full reconstruction. Stops after config.outer_iters iterations or once the
/// relative primal residual is <= tol_rel_primal and the relative objective
/// change over the last 5 iterations is <= tol_rel_obj.
SolveResult solve(const SparseSystemMatrix& a, const MeasurementSet& m, const ImageGrid& grid,
                  const SolverConfig& config, const SolveOptions& options = {});

}  // namespace scatter
