#pragma once

// Weighted spatial finite differences with Dirichlet-zero boundaries.
//
// For direction p with spatial offset +1 along one axis,
//   (G_p f)(s, q) = f(neighbor_p(s), q) - f(s, q),
// where f is taken as 0 outside the grid. Every voxel therefore carries exactly
// N = stencil.size() difference terms. Differences never couple spectral bins.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "scatter/grid.hpp"
#include "scatter/parallel.hpp"

namespace scatter {

enum class Axis { z, y };

struct NeighborStencil {
    std::vector<Axis> directions;

    /// Forward differences along +z and +y (N = 2).
    static NeighborStencil fan_plane() { return {{Axis::z, Axis::y}}; }
    static NeighborStencil along(Axis axis) { return {{axis}}; }

    std::size_t size() const { return directions.size(); }
};

/// Values indexed by (s, q, p) with p fastest: index = (s * Q + q) * N + p.
/// The N*Q entries of one spatial bin are contiguous, as are the N entries of
/// one (s, q) pair.
class EdgeField {
  public:
    EdgeField() = default;
    EdgeField(std::size_t num_spatial, std::size_t num_q, std::size_t num_dirs, double fill = 0.0)
        : num_spatial_(num_spatial), num_q_(num_q), num_dirs_(num_dirs),
          values_(num_spatial * num_q * num_dirs, fill) {}
    EdgeField(std::size_t num_spatial, std::size_t num_q, std::size_t num_dirs, std::vector<double> values);

    std::size_t num_spatial() const { return num_spatial_; }
    std::size_t num_q() const { return num_q_; }
    std::size_t num_dirs() const { return num_dirs_; }
    std::size_t size() const { return values_.size(); }

    std::size_t index(std::size_t s, std::size_t q, std::size_t p) const {
        return (s * num_q_ + q) * num_dirs_ + p;
    }
    double& operator()(std::size_t s, std::size_t q, std::size_t p) { return values_[index(s, q, p)]; }
    double operator()(std::size_t s, std::size_t q, std::size_t p) const { return values_[index(s, q, p)]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    bool same_shape(const EdgeField& other) const {
        return num_spatial_ == other.num_spatial_ && num_q_ == other.num_q_ && num_dirs_ == other.num_dirs_;
    }
    bool operator==(const EdgeField&) const = default;

  private:
    std::size_t num_spatial_ = 0;
    std::size_t num_q_ = 0;
    std::size_t num_dirs_ = 0;
    std::vector<double> values_;
};

/// Difference operator G = [G_1; ...; G_N] on a fixed grid, with precomputed
/// neighbor tables.
class DiffOperator {
  public:
    static constexpr std::size_t kOutside = static_cast<std::size_t>(-1);

    DiffOperator(const ImageGrid& grid, NeighborStencil stencil);

    const ImageGrid& grid() const { return grid_; }
    const NeighborStencil& stencil() const { return stencil_; }
    std::size_t num_dirs() const { return stencil_.size(); }
    std::size_t num_edges() const { return grid_.num_voxels() * stencil_.size(); }

    /// Spatial index of the +p neighbor of s, or kOutside.
    std::size_t forward_neighbor(std::size_t s, std::size_t p) const { return fwd_[s * num_dirs() + p]; }
    /// Spatial index t with forward_neighbor(t, p) == s, or kOutside.
    std::size_t backward_neighbor(std::size_t s, std::size_t p) const { return bwd_[s * num_dirs() + p]; }

    EdgeField make_field(double fill = 0.0) const {
        return EdgeField(grid_.num_spatial(), grid_.num_q(), num_dirs(), fill);
    }

    /// out = G f
    void apply(std::span<const double> f, EdgeField& out, const Exec& exec = {}) const;
    /// out = G^T e
    void adjoint(const EdgeField& e, std::span<double> out, const Exec& exec = {}) const;
    /// out = w .* (G f)
    void apply_weighted(std::span<const double> f, const EdgeField& w, EdgeField& out,
                        const Exec& exec = {}) const;

  private:
    ImageGrid grid_;
    NeighborStencil stencil_;
    std::vector<std::size_t> fwd_;
    std::vector<std::size_t> bwd_;
};

EdgeField forward_diff(const HyperImage& f, const NeighborStencil& stencil);
std::vector<double> adjoint_diff(const ImageGrid& grid, const EdgeField& e, const NeighborStencil& stencil);

/// w(s, q, p) = 1 / pitch of the axis of direction p, uniform over s and q.
EdgeField default_weights(const ImageGrid& grid, const NeighborStencil& stencil);

/// Replaces the defaults element-wise with user-supplied values laid out in
/// EdgeField order. Throws ValidationError on length mismatch or negative weights.
EdgeField weights_from_values(const ImageGrid& grid, const NeighborStencil& stencil,
                              std::vector<double> values);

}  // namespace scatter
