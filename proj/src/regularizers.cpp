#include "scatter/regularizers.hpp"

#include <cmath>
#include <string>

namespace scatter {

namespace {

std::size_t block_length(Regularizer reg, const EdgeField& u) {
    return reg == Regularizer::group_tv ? u.num_q() * u.num_dirs() : u.num_dirs();
}

double block_norm(std::span<const double> block) {
    double sq = 0.0;
    for (double x : block) sq += x * x;
    return std::sqrt(sq);
}

}  // namespace

double penalty_from_edges(Regularizer reg, const EdgeField& u, const Exec& exec) {
    const std::size_t len = block_length(reg, u);
    const std::size_t blocks = u.size() / len;
    const auto values = u.values();
    return parallel_sum(exec, blocks, [&](std::size_t b0, std::size_t b1) {
        double acc = 0.0;
        for (std::size_t b = b0; b < b1; ++b) acc += block_norm(values.subspan(b * len, len));
        return acc;
    });
}

namespace {

double tv_value(Regularizer reg, const HyperImage& f, const EdgeField& w, const NeighborStencil& stencil) {
    const DiffOperator op(f.grid(), stencil);
    EdgeField u = op.make_field();
    if (!u.same_shape(w)) throw ValidationError("weight field shape does not match grid and stencil");
    op.apply_weighted(f.values(), w, u);
    return penalty_from_edges(reg, u);
}

}  // namespace

double group_tv(const HyperImage& f, const EdgeField& w, const NeighborStencil& stencil) {
    return tv_value(Regularizer::group_tv, f, w, stencil);
}

double standard_tv(const HyperImage& f, const EdgeField& w, const NeighborStencil& stencil) {
    return tv_value(Regularizer::standard_tv, f, w, stencil);
}

void shrink_in_place(Regularizer reg, EdgeField& v, double tau, const Exec& exec) {
    if (!(tau >= 0.0)) throw ValidationError("shrinkage threshold must be >= 0, got " + std::to_string(tau));
    if (tau == 0.0) return;
    const std::size_t len = block_length(reg, v);
    const std::size_t blocks = v.size() / len;
    auto values = v.values();
    parallel_for(exec, blocks, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) {
            auto block = values.subspan(b * len, len);
            const double norm = block_norm(block);
            const double scale = norm > tau ? 1.0 - tau / norm : 0.0;
            for (double& x : block) x *= scale;
        }
    });
}

EdgeField block_shrink(const EdgeField& v, double tau, const Exec& exec) {
    EdgeField out = v;
    shrink_in_place(Regularizer::group_tv, out, tau, exec);
    return out;
}

EdgeField shrink_standard(const EdgeField& v, double tau, const Exec& exec) {
    EdgeField out = v;
    shrink_in_place(Regularizer::standard_tv, out, tau, exec);
    return out;
}

}  // namespace scatter
