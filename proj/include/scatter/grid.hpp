#pragma once

// Core data types: image grid, hyperspectral image, sparse forward operator,
// measurements and solver configuration.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace scatter {

/// Raised when inputs violate a documented constraint. The message names the
/// offending field.
class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Raised when the solver hits a numerical failure (infeasible mean, unbounded
/// voxel, non-finite iterate).
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class InfeasibleMeanError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

class UnboundedVoxelError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

/// Spatial (nz x ny) by spectral (Q) sampling of the reconstruction volume.
///
/// Spatial bins are linearized with y fastest, s = iz * ny + iy. Voxels are
/// linearized spectral-fastest, j = s * Q + q, so the momentum transfer profile
/// of one spatial bin is contiguous.
class ImageGrid {
  public:
    ImageGrid(std::size_t nz, std::size_t ny, std::size_t num_q, double dz,
              double dy, double q_min, double q_max);

    std::size_t nz() const { return nz_; }
    std::size_t ny() const { return ny_; }
    std::size_t num_q() const { return num_q_; }
    double dz() const { return dz_; }
    double dy() const { return dy_; }
    double q_min() const { return q_min_; }
    double q_max() const { return q_max_; }

    std::size_t num_spatial() const { return nz_ * ny_; }
    std::size_t num_voxels() const { return nz_ * ny_ * num_q_; }

    /// Spacing of the spectral bin centers; 0 for a single spectral bin.
    double spectral_step() const;
    /// Center of spectral bin q. Endpoints are included: q_center(0) = q_min and
    /// q_center(Q-1) = q_max.
    double q_center(std::size_t q) const;

    std::size_t spatial_index(std::size_t iz, std::size_t iy) const { return iz * ny_ + iy; }
    std::size_t iz_of(std::size_t s) const { return s / ny_; }
    std::size_t iy_of(std::size_t s) const { return s % ny_; }

    std::size_t linearize(std::size_t s, std::size_t q) const { return s * num_q_ + q; }
    std::pair<std::size_t, std::size_t> unlinearize(std::size_t j) const {
        return {j / num_q_, j % num_q_};
    }

    bool operator==(const ImageGrid&) const = default;

  private:
    std::size_t nz_;
    std::size_t ny_;
    std::size_t num_q_;
    double dz_;
    double dy_;
    double q_min_;
    double q_max_;
};

ImageGrid build_grid(std::size_t nz, std::size_t ny, std::size_t num_q, double dz,
                     double dy, double q_min, double q_max);

/// Nonnegative hyperspectral image over an ImageGrid.
class HyperImage {
  public:
    explicit HyperImage(const ImageGrid& grid);  // all zeros
    HyperImage(const ImageGrid& grid, std::vector<double> values);

    const ImageGrid& grid() const { return grid_; }
    std::span<const double> values() const { return values_; }
    double at(std::size_t s, std::size_t q) const { return values_[grid_.linearize(s, q)]; }
    /// Momentum transfer profile of spatial bin s (length Q).
    std::span<const double> profile(std::size_t s) const {
        return std::span<const double>(values_).subspan(s * grid_.num_q(), grid_.num_q());
    }

    bool operator==(const HyperImage&) const = default;

  private:
    ImageGrid grid_;
    std::vector<double> values_;
};

struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
};

/// Nonnegative I x J forward operator stored in both row- and column-compressed
/// form. Row-major traversal serves forward projection, column-major traversal
/// serves back projection; each output element is a fixed-order sum.
class SparseSystemMatrix {
  public:
    /// Rejects non-positive values, out-of-range indices and duplicate entries.
    SparseSystemMatrix(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t nnz() const { return row_vals_.size(); }

    /// sigma_j = sum_i a_ij.
    std::span<const double> column_sums() const { return column_sums_; }

    /// Entries in row-major order (sorted by row, then column).
    std::vector<Triplet> triplets() const;

    // CSR view
    std::span<const std::size_t> row_ptr() const { return row_ptr_; }
    std::span<const std::size_t> row_cols() const { return row_cols_; }
    std::span<const double> row_vals() const { return row_vals_; }

    // CSC view
    std::span<const std::size_t> col_ptr() const { return col_ptr_; }
    std::span<const std::size_t> col_rows() const { return col_rows_; }
    std::span<const double> col_vals() const { return col_vals_; }

  private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<std::size_t> row_ptr_, row_cols_;
    std::vector<double> row_vals_;
    std::vector<std::size_t> col_ptr_, col_rows_;
    std::vector<double> col_vals_;
    std::vector<double> column_sums_;
};

/// Poisson counts y and known background r.
class MeasurementSet {
  public:
    MeasurementSet(std::vector<double> counts, std::vector<double> background);

    std::size_t size() const { return counts_.size(); }
    std::span<const double> counts() const { return counts_; }
    std::span<const double> background() const { return background_; }

  private:
    std::vector<double> counts_;
    std::vector<double> background_;
};

enum class Regularizer { group_tv, standard_tv };

std::string to_string(Regularizer reg);
Regularizer regularizer_from_string(const std::string& name);

struct SolverConfig {
    double beta = 0.0;
    /// ADMM penalty. Unset means beta (or 1 when beta is 0).
    std::optional<double> lambda;
    std::size_t outer_iters = 200;
    std::size_t inner_iters = 1;
    Regularizer regularizer = Regularizer::group_tv;
    double tol_rel_primal = 1e-6;
    double tol_rel_obj = 1e-9;
    std::uint64_t seed = 0;
    bool deterministic_reductions = true;

    /// Throws ValidationError naming the first invalid field.
    void validate() const;
    double effective_lambda() const;
};

struct ProblemDiagnostics {
    /// Voxels whose column of A is empty (sigma_j = 0).
    std::vector<std::size_t> unobservable_voxels;
    /// Rows with an empty row of A, zero background and a positive count.
    std::vector<std::size_t> infeasible_rows;

    bool has_warnings() const { return !unobservable_voxels.empty() || !infeasible_rows.empty(); }
};

/// Checks dimensional consistency (throws ValidationError on mismatch) and
/// collects warnings about unobservable voxels and infeasible rows.
ProblemDiagnostics validate_problem(const SparseSystemMatrix& a, const MeasurementSet& m,
                                    const ImageGrid& grid);

}  // namespace scatter
