#include "scatter/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace scatter {

namespace {

template <typename... Args>
std::string concat(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}

}  // namespace

ImageGrid::ImageGrid(std::size_t nz, std::size_t ny, std::size_t num_q, double dz, double dy,
                     double q_min, double q_max)
    : nz_(nz), ny_(ny), num_q_(num_q), dz_(dz), dy_(dy), q_min_(q_min), q_max_(q_max) {
    if (nz == 0) throw ValidationError("grid.nz must be >= 1");
    if (ny == 0) throw ValidationError("grid.ny must be >= 1");
    if (num_q == 0) throw ValidationError("grid.Q must be >= 1");
    if (!(dz > 0.0) || !std::isfinite(dz)) throw ValidationError(concat("grid.dz must be > 0, got ", dz));
    if (!(dy > 0.0) || !std::isfinite(dy)) throw ValidationError(concat("grid.dy must be > 0, got ", dy));
    if (!std::isfinite(q_min) || !std::isfinite(q_max) || !(q_min < q_max))
        throw ValidationError(concat("grid.q_min must be < grid.q_max, got ", q_min, " and ", q_max));
}

double ImageGrid::spectral_step() const {
    if (num_q_ == 1) return 0.0;
    return (q_max_ - q_min_) / static_cast<double>(num_q_ - 1);
}

double ImageGrid::q_center(std::size_t q) const {
    if (num_q_ > 1 && q + 1 == num_q_) return q_max_;
    return q_min_ + static_cast<double>(q) * spectral_step();
}

ImageGrid build_grid(std::size_t nz, std::size_t ny, std::size_t num_q, double dz, double dy,
                     double q_min, double q_max) {
    return ImageGrid(nz, ny, num_q, dz, dy, q_min, q_max);
}

HyperImage::HyperImage(const ImageGrid& grid) : grid_(grid), values_(grid.num_voxels(), 0.0) {}

HyperImage::HyperImage(const ImageGrid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.num_voxels())
        throw ValidationError(concat("image length ", values_.size(), " does not match grid J = ",
                                     grid_.num_voxels()));
    for (std::size_t j = 0; j < values_.size(); ++j) {
        if (!(values_[j] >= 0.0) || !std::isfinite(values_[j]))
            throw ValidationError(concat("image value at voxel ", j, " must be finite and >= 0"));
    }
}

SparseSystemMatrix::SparseSystemMatrix(std::size_t rows, std::size_t cols,
                                       std::vector<Triplet> triplets)
    : rows_(rows), cols_(cols) {
    if (rows == 0 || cols == 0) throw ValidationError("system matrix must have rows >= 1 and cols >= 1");
    for (const auto& t : triplets) {
        if (t.row >= rows || t.col >= cols)
            throw ValidationError(concat("system matrix entry (", t.row, ", ", t.col,
                                         ") out of bounds for ", rows, " x ", cols));
        if (!(t.value > 0.0) || !std::isfinite(t.value))
            throw ValidationError(concat("system matrix entry (", t.row, ", ", t.col,
                                         ") must be finite and > 0, got ", t.value));
    }
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    for (std::size_t k = 1; k < triplets.size(); ++k) {
        if (triplets[k].row == triplets[k - 1].row && triplets[k].col == triplets[k - 1].col)
            throw ValidationError(concat("duplicate system matrix entry (", triplets[k].row, ", ",
                                         triplets[k].col, ")"));
    }

    const std::size_t nnz = triplets.size();
    row_ptr_.assign(rows + 1, 0);
    row_cols_.resize(nnz);
    row_vals_.resize(nnz);
    for (std::size_t k = 0; k < nnz; ++k) {
        ++row_ptr_[triplets[k].row + 1];
        row_cols_[k] = triplets[k].col;
        row_vals_[k] = triplets[k].value;
    }
    std::partial_sum(row_ptr_.begin(), row_ptr_.end(), row_ptr_.begin());

    // Counting sort by column keeps rows ascending within each column.
    col_ptr_.assign(cols + 1, 0);
    for (const auto& t : triplets) ++col_ptr_[t.col + 1];
    std::partial_sum(col_ptr_.begin(), col_ptr_.end(), col_ptr_.begin());
    col_rows_.resize(nnz);
    col_vals_.resize(nnz);
    std::vector<std::size_t> fill(col_ptr_.begin(), col_ptr_.end() - 1);
    for (const auto& t : triplets) {
        const std::size_t dst = fill[t.col]++;
        col_rows_[dst] = t.row;
        col_vals_[dst] = t.value;
    }

    column_sums_.assign(cols, 0.0);
    for (std::size_t j = 0; j < cols; ++j) {
        double sum = 0.0;
        for (std::size_t k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k) sum += col_vals_[k];
        column_sums_[j] = sum;
    }
}

std::vector<Triplet> SparseSystemMatrix::triplets() const {
    std::vector<Triplet> out;
    out.reserve(nnz());
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
            out.push_back({i, row_cols_[k], row_vals_[k]});
    return out;
}

MeasurementSet::MeasurementSet(std::vector<double> counts, std::vector<double> background)
    : counts_(std::move(counts)), background_(std::move(background)) {
    if (counts_.size() != background_.size())
        throw ValidationError(concat("counts length ", counts_.size(),
                                     " does not match background length ", background_.size()));
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        const double y = counts_[i];
        if (!(y >= 0.0) || !std::isfinite(y) || std::floor(y) != y)
            throw ValidationError(concat("count y[", i, "] must be a nonnegative integer, got ", y));
        if (!(background_[i] >= 0.0) || !std::isfinite(background_[i]))
            throw ValidationError(concat("background r[", i, "] must be finite and >= 0, got ",
                                         background_[i]));
    }
}

std::string to_string(Regularizer reg) {
    return reg == Regularizer::group_tv ? "group_tv" : "standard_tv";
}

Regularizer regularizer_from_string(const std::string& name) {
    if (name == "group_tv") return Regularizer::group_tv;
    if (name == "standard_tv") return Regularizer::standard_tv;
    throw ValidationError("regularizer must be \"group_tv\" or \"standard_tv\", got \"" + name + "\"");
}

void SolverConfig::validate() const {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ValidationError(concat("beta must be >= 0, got ", beta));
    if (lambda && (!(*lambda > 0.0) || !std::isfinite(*lambda)))
        throw ValidationError(concat("lambda must be > 0, got ", *lambda));
    if (outer_iters < 1) throw ValidationError("outer_iters must be >= 1");
    if (inner_iters < 1) throw ValidationError("inner_iters must be >= 1");
    if (!(tol_rel_primal > 0.0)) throw ValidationError(concat("tol_rel_primal must be > 0, got ", tol_rel_primal));
    if (!(tol_rel_obj > 0.0)) throw ValidationError(concat("tol_rel_obj must be > 0, got ", tol_rel_obj));
}

double SolverConfig::effective_lambda() const {
    if (lambda) return *lambda;
    return beta > 0.0 ? beta : 1.0;
}

ProblemDiagnostics validate_problem(const SparseSystemMatrix& a, const MeasurementSet& m,
                                    const ImageGrid& grid) {
    if (a.cols() != grid.num_voxels())
        throw ValidationError(concat("system matrix has ", a.cols(), " columns but grid has J = ",
                                     grid.num_voxels(), " voxels"));
    if (a.rows() != m.size())
        throw ValidationError(concat("system matrix has ", a.rows(), " rows but ", m.size(),
                                     " measurements were given"));

    ProblemDiagnostics diag;
    const auto sigma = a.column_sums();
    for (std::size_t j = 0; j < sigma.size(); ++j)
        if (sigma[j] == 0.0) diag.unobservable_voxels.push_back(j);

    const auto row_ptr = a.row_ptr();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        if (row_ptr[i] == row_ptr[i + 1] && m.background()[i] == 0.0 && m.counts()[i] > 0.0)
            diag.infeasible_rows.push_back(i);
    }
    return diag;
}

}  // namespace scatter
