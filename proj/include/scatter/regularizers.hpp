#pragma once

// Total-variation penalties on weighted differences u = w .* (G f) and their
// proximal maps.
//
//   group TV:    sum_s       || u(s, :, :) ||_2   one norm over all Q*N terms of s
//   standard TV: sum_s sum_q || u(s, q, :) ||_2   spectral bins treated independently

#include <span>

#include "scatter/diffop.hpp"
#include "scatter/grid.hpp"
#include "scatter/parallel.hpp"

namespace scatter {

/// Penalty value of an already weighted edge field.
double penalty_from_edges(Regularizer reg, const EdgeField& u, const Exec& exec = {});

double group_tv(const HyperImage& f, const EdgeField& w, const NeighborStencil& stencil);
double standard_tv(const HyperImage& f, const EdgeField& w, const NeighborStencil& stencil);

/// Block soft-thresholding with one block per spatial bin (length Q*N):
///   d_s = max(1 - tau / ||v_s||, 0) * v_s.
/// This is the exact minimizer of tau * ||d_s|| + 1/2 ||d_s - v_s||^2, i.e. the
/// splitting-variable update with tau = beta / lambda.
EdgeField block_shrink(const EdgeField& v, double tau, const Exec& exec = {});

/// Same map with one block per (s, q) pair (length N).
EdgeField shrink_standard(const EdgeField& v, double tau, const Exec& exec = {});

/// In-place shrinkage with the block structure of reg.
void shrink_in_place(Regularizer reg, EdgeField& v, double tau, const Exec& exec = {});

}  // namespace scatter
