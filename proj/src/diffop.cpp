#include "scatter/diffop.hpp"

#include <cmath>
#include <string>

namespace scatter {

EdgeField::EdgeField(std::size_t num_spatial, std::size_t num_q, std::size_t num_dirs,
                     std::vector<double> values)
    : num_spatial_(num_spatial), num_q_(num_q), num_dirs_(num_dirs), values_(std::move(values)) {
    if (values_.size() != num_spatial * num_q * num_dirs)
        throw ValidationError("edge field length " + std::to_string(values_.size()) + " does not match S*Q*N = " +
                              std::to_string(num_spatial * num_q * num_dirs));
}

DiffOperator::DiffOperator(const ImageGrid& grid, NeighborStencil stencil)
    : grid_(grid), stencil_(std::move(stencil)) {
    if (stencil_.directions.empty()) throw ValidationError("stencil must have at least one direction");
    const std::size_t S = grid_.num_spatial();
    const std::size_t N = num_dirs();
    fwd_.assign(S * N, kOutside);
    bwd_.assign(S * N, kOutside);
    for (std::size_t s = 0; s < S; ++s) {
        const std::size_t iz = grid_.iz_of(s);
        const std::size_t iy = grid_.iy_of(s);
        for (std::size_t p = 0; p < N; ++p) {
            std::size_t t = kOutside;
            if (stencil_.directions[p] == Axis::z) {
                if (iz + 1 < grid_.nz()) t = grid_.spatial_index(iz + 1, iy);
            } else {
                if (iy + 1 < grid_.ny()) t = grid_.spatial_index(iz, iy + 1);
            }
            fwd_[s * N + p] = t;
            if (t != kOutside) bwd_[t * N + p] = s;
        }
    }
}

void DiffOperator::apply(std::span<const double> f, EdgeField& out, const Exec& exec) const {
    const std::size_t Q = grid_.num_q();
    const std::size_t N = num_dirs();
    parallel_for(exec, grid_.num_spatial(), [&](std::size_t s0, std::size_t s1) {
        for (std::size_t s = s0; s < s1; ++s) {
            for (std::size_t p = 0; p < N; ++p) {
                const std::size_t t = forward_neighbor(s, p);
                for (std::size_t q = 0; q < Q; ++q) {
                    const double next = t == kOutside ? 0.0 : f[t * Q + q];
                    out(s, q, p) = next - f[s * Q + q];
                }
            }
        }
    });
}

void DiffOperator::apply_weighted(std::span<const double> f, const EdgeField& w, EdgeField& out,
                                  const Exec& exec) const {
    apply(f, out, exec);
    auto o = out.values();
    const auto wv = w.values();
    parallel_for(exec, o.size(), [&](std::size_t k0, std::size_t k1) {
        for (std::size_t k = k0; k < k1; ++k) o[k] *= wv[k];
    });
}

void DiffOperator::adjoint(const EdgeField& e, std::span<double> out, const Exec& exec) const {
    const std::size_t Q = grid_.num_q();
    const std::size_t N = num_dirs();
    // (G^T e)(s, q) = sum_p [ e(bwd_p(s), q, p) - e(s, q, p) ]
    parallel_for(exec, grid_.num_spatial(), [&](std::size_t s0, std::size_t s1) {
        for (std::size_t s = s0; s < s1; ++s) {
            for (std::size_t q = 0; q < Q; ++q) {
                double acc = 0.0;
                for (std::size_t p = 0; p < N; ++p) {
                    const std::size_t t = backward_neighbor(s, p);
                    if (t != kOutside) acc += e(t, q, p);
                    acc -= e(s, q, p);
                }
                out[s * Q + q] = acc;
            }
        }
    });
}

EdgeField forward_diff(const HyperImage& f, const NeighborStencil& stencil) {
    const DiffOperator op(f.grid(), stencil);
    EdgeField out = op.make_field();
    op.apply(f.values(), out);
    return out;
}

std::vector<double> adjoint_diff(const ImageGrid& grid, const EdgeField& e, const NeighborStencil& stencil) {
    const DiffOperator op(grid, stencil);
    std::vector<double> out(grid.num_voxels(), 0.0);
    op.adjoint(e, out);
    return out;
}

EdgeField default_weights(const ImageGrid& grid, const NeighborStencil& stencil) {
    std::vector<double> values(grid.num_voxels() * stencil.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        const Axis axis = stencil.directions[k % stencil.size()];
        values[k] = 1.0 / (axis == Axis::z ? grid.dz() : grid.dy());
    }
    return EdgeField(grid.num_spatial(), grid.num_q(), stencil.size(), std::move(values));
}

EdgeField weights_from_values(const ImageGrid& grid, const NeighborStencil& stencil,
                              std::vector<double> values) {
    const std::size_t expected = grid.num_voxels() * stencil.size();
    if (values.size() != expected)
        throw ValidationError("weights file has " + std::to_string(values.size()) + " values, expected S*Q*N = " +
                              std::to_string(expected));
    for (std::size_t k = 0; k < values.size(); ++k)
        if (!(values[k] >= 0.0) || !std::isfinite(values[k]))
            throw ValidationError("weight " + std::to_string(k) + " must be finite and >= 0");
    return EdgeField(grid.num_spatial(), grid.num_q(), stencil.size(), std::move(values));
}

}  // namespace scatter
