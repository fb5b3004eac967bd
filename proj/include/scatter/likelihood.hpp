#pragma once

// Poisson measurement model y_i ~ Poisson((A f)_i + r_i).
//
// The objective is the negative log-likelihood with the log(y_i!) constant
// dropped:  NLL(f) = sum_i [ ybar_i - y_i ln ybar_i ],  0 * ln(.) = 0.

#include <span>
#include <vector>

#include "scatter/grid.hpp"
#include "scatter/parallel.hpp"

namespace scatter {

/// Floor applied to means before forming the ratio y_i / ybar_i.
inline constexpr double kMeanFloor = 1e-300;

/// ybar = A f + r
std::vector<double> forward_project(const SparseSystemMatrix& a, std::span<const double> f,
                                    std::span<const double> r, const Exec& exec = {});

/// out = A^T v
std::vector<double> back_project(const SparseSystemMatrix& a, std::span<const double> v,
                                 const Exec& exec = {});

/// Throws InfeasibleMeanError when ybar_i <= 0 for some y_i > 0.
double neg_log_likelihood(std::span<const double> y, std::span<const double> ybar, const Exec& exec = {});

/// grad_j = sigma_j - sum_i a_ij y_i / ybar_i
std::vector<double> nll_gradient(const SparseSystemMatrix& a, std::span<const double> y,
                                 std::span<const double> ybar, const Exec& exec = {});

/// Per-voxel coefficients of the separable EM majorizer
///   Q_L(f | f^n) = sum_j [ sigma_j f_j - e_j ln f_j ] + const,
/// with e_j = f^n_j * sum_i a_ij y_i / ybar^n_i. The background's share of each
/// count is absorbed by the ratio y_i / ybar^n_i.
struct SurrogateCoeffs {
    std::vector<double> e;
    std::vector<double> sigma;
};

SurrogateCoeffs em_coeffs(const SparseSystemMatrix& a, const MeasurementSet& m, std::span<const double> f,
                          const Exec& exec = {});

/// Variant that reuses a precomputed ybar = A f + r.
SurrogateCoeffs em_coeffs_from_mean(const SparseSystemMatrix& a, std::span<const double> y,
                                    std::span<const double> ybar, std::span<const double> f,
                                    const Exec& exec = {});

/// sum_j [ sigma_j f_j - e_j ln f_j ] (the non-constant part of Q_L). Terms with
/// e_j = 0 contribute sigma_j f_j only.
double em_surrogate_value(const SurrogateCoeffs& coeffs, std::span<const double> f);

}  // namespace scatter
