#include "scatter/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace scatter {

namespace {

void require_size(std::size_t got, std::size_t want, const char* what) {
    if (got != want)
        throw ValidationError(std::string(what) + " has length " + std::to_string(got) + ", expected " +
                              std::to_string(want));
}

void check_feasible(std::span<const double> y, std::span<const double> ybar) {
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] > 0.0 && !(ybar[i] > 0.0))
            throw InfeasibleMeanError("mean of measurement " + std::to_string(i) + " is " +
                                      std::to_string(ybar[i]) + " but its count is " + std::to_string(y[i]));
}

}  // namespace

std::vector<double> forward_project(const SparseSystemMatrix& a, std::span<const double> f,
                                    std::span<const double> r, const Exec& exec) {
    require_size(f.size(), a.cols(), "image");
    require_size(r.size(), a.rows(), "background");
    std::vector<double> out(a.rows());
    const auto ptr = a.row_ptr();
    const auto cols = a.row_cols();
    const auto vals = a.row_vals();
    parallel_for(exec, a.rows(), [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            double acc = 0.0;
            for (std::size_t k = ptr[i]; k < ptr[i + 1]; ++k) acc += vals[k] * f[cols[k]];
            out[i] = acc + r[i];
        }
    });
    return out;
}

std::vector<double> back_project(const SparseSystemMatrix& a, std::span<const double> v, const Exec& exec) {
    require_size(v.size(), a.rows(), "row vector");
    std::vector<double> out(a.cols());
    const auto ptr = a.col_ptr();
    const auto rows = a.col_rows();
    const auto vals = a.col_vals();
    parallel_for(exec, a.cols(), [&](std::size_t j0, std::size_t j1) {
        for (std::size_t j = j0; j < j1; ++j) {
            double acc = 0.0;
            for (std::size_t k = ptr[j]; k < ptr[j + 1]; ++k) acc += vals[k] * v[rows[k]];
            out[j] = acc;
        }
    });
    return out;
}

double neg_log_likelihood(std::span<const double> y, std::span<const double> ybar, const Exec& exec) {
    require_size(ybar.size(), y.size(), "mean vector");
    check_feasible(y, ybar);
    return parallel_sum(exec, y.size(), [&](std::size_t i0, std::size_t i1) {
        double acc = 0.0;
        for (std::size_t i = i0; i < i1; ++i) {
            acc += ybar[i];
            if (y[i] > 0.0) acc -= y[i] * std::log(ybar[i]);
        }
        return acc;
    });
}

namespace {

std::vector<double> count_ratio(std::span<const double> y, std::span<const double> ybar) {
    std::vector<double> ratio(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        ratio[i] = y[i] > 0.0 ? y[i] / std::max(ybar[i], kMeanFloor) : 0.0;
    return ratio;
}

}  // namespace

std::vector<double> nll_gradient(const SparseSystemMatrix& a, std::span<const double> y,
                                 std::span<const double> ybar, const Exec& exec) {
    require_size(y.size(), a.rows(), "counts");
    require_size(ybar.size(), a.rows(), "mean vector");
    check_feasible(y, ybar);
    std::vector<double> grad = back_project(a, count_ratio(y, ybar), exec);
    const auto sigma = a.column_sums();
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] = sigma[j] - grad[j];
    return grad;
}

SurrogateCoeffs em_coeffs_from_mean(const SparseSystemMatrix& a, std::span<const double> y,
                                    std::span<const double> ybar, std::span<const double> f,
                                    const Exec& exec) {
    require_size(f.size(), a.cols(), "image");
    require_size(y.size(), a.rows(), "counts");
    require_size(ybar.size(), a.rows(), "mean vector");
    check_feasible(y, ybar);
    SurrogateCoeffs out;
    out.e = back_project(a, count_ratio(y, ybar), exec);
    for (std::size_t j = 0; j < f.size(); ++j) out.e[j] = f[j] > 0.0 ? f[j] * out.e[j] : 0.0;
    out.sigma.assign(a.column_sums().begin(), a.column_sums().end());
    return out;
}

SurrogateCoeffs em_coeffs(const SparseSystemMatrix& a, const MeasurementSet& m, std::span<const double> f,
                          const Exec& exec) {
    const auto ybar = forward_project(a, f, m.background(), exec);
    return em_coeffs_from_mean(a, m.counts(), ybar, f, exec);
}

double em_surrogate_value(const SurrogateCoeffs& coeffs, std::span<const double> f) {
    double acc = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) {
        acc += coeffs.sigma[j] * f[j];
        if (coeffs.e[j] > 0.0) acc -= coeffs.e[j] * std::log(f[j]);
    }
    return acc;
}

}  // namespace scatter
