#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace oracle {

using scatter::Axis;
using scatter::ImageGrid;
using scatter::NeighborStencil;
using scatter::Regularizer;

Dense dense_from_sparse(const scatter::SparseSystemMatrix& a) {
    Dense m(a.rows(), std::vector<double>(a.cols(), 0.0));
    for (const auto& t : a.triplets()) m[t.row][t.col] = t.value;
    return m;
}

Dense dense_difference_matrix(const ImageGrid& grid, const NeighborStencil& stencil) {
    const std::size_t Q = grid.num_q();
    const std::size_t N = stencil.size();
    const std::size_t J = grid.num_voxels();
    Dense g(J * N, std::vector<double>(J, 0.0));
    for (std::size_t iz = 0; iz < grid.nz(); ++iz) {
        for (std::size_t iy = 0; iy < grid.ny(); ++iy) {
            const std::size_t s = iz * grid.ny() + iy;
            for (std::size_t q = 0; q < Q; ++q) {
                for (std::size_t p = 0; p < N; ++p) {
                    const std::size_t row = (s * Q + q) * N + p;
                    g[row][s * Q + q] -= 1.0;
                    std::size_t nz = iz, ny = iy;
                    if (stencil.directions[p] == Axis::z) ++nz; else ++ny;
                    if (nz < grid.nz() && ny < grid.ny()) g[row][(nz * grid.ny() + ny) * Q + q] += 1.0;
                }
            }
        }
    }
    return g;
}

std::vector<double> matvec(const Dense& m, std::span<const double> x) {
    std::vector<double> out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        long double acc = 0.0L;
        for (std::size_t j = 0; j < x.size(); ++j) acc += static_cast<long double>(m[i][j]) * x[j];
        out[i] = static_cast<double>(acc);
    }
    return out;
}

std::vector<double> matvec_transpose(const Dense& m, std::span<const double> x) {
    const std::size_t cols = m.empty() ? 0 : m.front().size();
    std::vector<long double> acc(cols, 0.0L);
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j) acc[j] += static_cast<long double>(m[i][j]) * x[i];
    return std::vector<double>(acc.begin(), acc.end());
}

double nll_extended(std::span<const double> y, std::span<const double> ybar) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < y.size(); ++i) {
        acc += ybar[i];
        if (y[i] > 0.0) acc -= static_cast<long double>(y[i]) * std::log(static_cast<long double>(ybar[i]));
    }
    return static_cast<double>(acc);
}

double naive_tv(const ImageGrid& grid, std::span<const double> f, std::span<const double> w,
                const NeighborStencil& stencil, Regularizer reg) {
    const std::size_t Q = grid.num_q();
    const std::size_t N = stencil.size();
    auto value = [&](std::size_t iz, std::size_t iy, std::size_t q) -> long double {
        if (iz >= grid.nz() || iy >= grid.ny()) return 0.0L;
        return f[(iz * grid.ny() + iy) * Q + q];
    };
    long double total = 0.0L;
    for (std::size_t iz = 0; iz < grid.nz(); ++iz) {
        for (std::size_t iy = 0; iy < grid.ny(); ++iy) {
            const std::size_t s = iz * grid.ny() + iy;
            long double group_sq = 0.0L;
            for (std::size_t q = 0; q < Q; ++q) {
                long double bin_sq = 0.0L;
                for (std::size_t p = 0; p < N; ++p) {
                    const bool along_z = stencil.directions[p] == Axis::z;
                    const long double diff =
                        value(iz + (along_z ? 1 : 0), iy + (along_z ? 0 : 1), q) - value(iz, iy, q);
                    const long double t = w[(s * Q + q) * N + p] * diff;
                    bin_sq += t * t;
                }
                group_sq += bin_sq;
                if (reg == Regularizer::standard_tv) total += std::sqrt(bin_sq);
            }
            if (reg == Regularizer::group_tv) total += std::sqrt(group_sq);
        }
    }
    return static_cast<double>(total);
}

std::vector<double> mlem_step(const Dense& a, std::span<const double> y, std::span<const double> r,
                              std::span<const double> f) {
    const std::size_t rows = a.size();
    const std::size_t cols = f.size();
    std::vector<double> ybar(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < cols; ++j) acc += a[i][j] * f[j];
        ybar[i] = acc + r[i];
    }
    std::vector<double> out(cols, 0.0);
    for (std::size_t j = 0; j < cols; ++j) {
        double sigma = 0.0;
        double back = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
            sigma += a[i][j];
            if (a[i][j] != 0.0 && y[i] > 0.0) back += a[i][j] * y[i] / ybar[i];
        }
        out[j] = f[j] / sigma * back;
    }
    return out;
}

std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& fun,
                                std::span<const double> x, double h) {
    std::vector<double> probe(x.begin(), x.end());
    std::vector<double> grad(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        probe[j] = x[j] + h;
        const double up = fun(probe);
        probe[j] = x[j] - h;
        const double down = fun(probe);
        probe[j] = x[j];
        grad[j] = (up - down) / (2.0 * h);
    }
    return grad;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<long double>(a[i]) * b[i];
    return static_cast<double>(acc);
}

}  // namespace

namespace {

// Solves h x = b by Gaussian elimination with partial pivoting.
std::vector<double> solve_dense(std::vector<std::vector<double>> h, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(h[r][c]) > std::abs(h[piv][c])) piv = r;
        std::swap(h[c], h[piv]);
        std::swap(b[c], b[piv]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double m = h[r][c] / h[c][c];
            for (std::size_t k = c; k < n; ++k) h[r][k] -= m * h[c][k];
            b[r] -= m * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t c = n; c-- > 0;) {
        double acc = b[c];
        for (std::size_t k = c + 1; k < n; ++k) acc -= h[c][k] * x[k];
        x[c] = acc / h[c][c];
    }
    return x;
}

}  // namespace

std::vector<double> prox_numeric(std::span<const double> v, double tau) {
    if (v.size() > 64) throw std::runtime_error("prox_numeric: block longer than 64");
    std::vector<double> d(v.begin(), v.end());
    if (tau == 0.0) return d;

    const std::size_t n = v.size();
    std::vector<double> grad(n), trial(n), trial_grad(n);
    double eps = 1e-2;
    auto objective = [&](std::span<const double> x) {
        double sq = 0.0, dist = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            sq += x[k] * x[k];
            dist += (x[k] - v[k]) * (x[k] - v[k]);
        }
        return tau * std::sqrt(sq + eps * eps) + 0.5 * dist;
    };
    auto gradient = [&](std::span<const double> x, std::span<double> out) {
        const double norm = std::sqrt(dot(x, x) + eps * eps);
        for (std::size_t k = 0; k < n; ++k) out[k] = tau * x[k] / norm + x[k] - v[k];
    };
    auto grad_norm = [&](std::span<const double> x) {
        std::vector<double> g(n);
        gradient(x, g);
        return std::sqrt(dot(g, g));
    };

    for (; eps >= 1e-12 * 0.999; eps *= 0.1) {
        // Gradient descent with a Barzilai-Borwein step and Armijo backtracking.
        gradient(d, grad);
        double step = 1.0 / (1.0 + tau / eps);
        double value = objective(d);
        bool done = false;
        for (int it = 0; it < 100000 && !done; ++it) {
            double t = step;
            while (true) {
                for (std::size_t k = 0; k < n; ++k) trial[k] = d[k] - t * grad[k];
                const double tv = objective(trial);
                if (tv <= value - 1e-4 * t * dot(grad, grad) || t < 1e-300) {
                    value = tv;
                    break;
                }
                t *= 0.5;
            }
            gradient(trial, trial_grad);
            double sy = 0.0, ss = 0.0, change = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double s = trial[k] - d[k];
                sy += s * (trial_grad[k] - grad[k]);
                ss += s * s;
                change = std::max(change, std::abs(s));
            }
            d = trial;
            grad = trial_grad;
            step = sy > 0.0 ? ss / sy : 1.0;
            done = change <= 1e-12;
        }

        // Newton polish. The smoothed objective is 1-strongly convex, so the
        // final gradient norm bounds the distance to its minimizer.
        double gn = grad_norm(d);
        for (int it = 0; it < 200 && gn > 1e-14; ++it) {
            gradient(d, grad);
            const double s = std::sqrt(dot(d, d) + eps * eps);
            std::vector<std::vector<double>> h(n, std::vector<double>(n, 0.0));
            for (std::size_t a = 0; a < n; ++a) {
                for (std::size_t b = 0; b < n; ++b) h[a][b] = -tau * d[a] * d[b] / (s * s * s);
                h[a][a] += 1.0 + tau / s;
            }
            const auto p = solve_dense(h, grad);
            double t = 1.0, next = gn;
            while (t > 1e-12) {
                for (std::size_t k = 0; k < n; ++k) trial[k] = d[k] - t * p[k];
                next = grad_norm(trial);
                if (next < gn) break;
                t *= 0.5;
            }
            if (!(next < gn)) break;
            d = trial;
            gn = next;
        }
        if (!(gn <= 1e-10)) throw std::runtime_error("prox_numeric: no convergence at eps = " + std::to_string(eps));
    }
    return d;
}

double dense_penalized_objective(const Dense& a, const Dense& g, std::span<const double> y,
                                 std::span<const double> r, std::span<const double> w, double beta,
                                 const ImageGrid& grid, std::size_t num_dirs, Regularizer reg,
                                 std::span<const double> f) {
    std::vector<double> ybar = matvec(a, f);
    for (std::size_t i = 0; i < ybar.size(); ++i) ybar[i] += r[i];
    for (std::size_t i = 0; i < ybar.size(); ++i)
        if (y[i] > 0.0 && !(ybar[i] > 0.0)) return std::numeric_limits<double>::infinity();
    double value = nll_extended(y, ybar);
    if (beta > 0.0) {
        std::vector<double> u = matvec(g, f);
        const std::size_t len = reg == Regularizer::group_tv ? grid.num_q() * num_dirs : num_dirs;
        long double pen = 0.0L;
        for (std::size_t b = 0; b * len < u.size(); ++b) {
            long double sq = 0.0L;
            for (std::size_t k = b * len; k < (b + 1) * len; ++k) {
                const long double t = static_cast<long double>(w[k]) * u[k];
                sq += t * t;
            }
            pen += std::sqrt(sq);
        }
        value += beta * static_cast<double>(pen);
    }
    return value;
}

ReferenceSolution reference_solve(const scatter::SparseSystemMatrix& sparse, const scatter::MeasurementSet& m,
                                  std::span<const double> w, double beta, const ImageGrid& grid, Regularizer reg,
                                  const NeighborStencil& stencil) {
    const std::size_t J = grid.num_voxels();
    const std::size_t I = sparse.rows();
    if (J > 200 || I > 400) throw std::runtime_error("reference_solve: instance too large");
    const Dense a = dense_from_sparse(sparse);
    const Dense g = dense_difference_matrix(grid, stencil);
    const auto y = m.counts();
    const auto r = m.background();
    const std::size_t N = stencil.size();
    const std::size_t len = reg == Regularizer::group_tv ? grid.num_q() * N : N;
    const double inf = std::numeric_limits<double>::infinity();

    std::vector<double> sigma(J, 0.0);
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j) sigma[j] += a[i][j];

    double eps = 1e-2;
    auto objective = [&](std::span<const double> f) -> double {
        std::vector<double> ybar = matvec(a, f);
        for (std::size_t i = 0; i < I; ++i) {
            ybar[i] += r[i];
            if (y[i] > 0.0 && !(ybar[i] > 0.0)) return inf;
        }
        double value = nll_extended(y, ybar);
        if (beta > 0.0) {
            const std::vector<double> u = matvec(g, f);
            long double pen = 0.0L;
            for (std::size_t b = 0; b * len < u.size(); ++b) {
                long double sq = 0.0L;
                for (std::size_t k = b * len; k < (b + 1) * len; ++k) {
                    const long double t = static_cast<long double>(w[k]) * u[k];
                    sq += t * t;
                }
                pen += std::sqrt(sq + static_cast<long double>(eps) * eps);
            }
            value += beta * static_cast<double>(pen);
        }
        return value;
    };
    auto gradient = [&](std::span<const double> f) {
        std::vector<double> ybar = matvec(a, f);
        std::vector<double> ratio(I, 0.0);
        for (std::size_t i = 0; i < I; ++i) ratio[i] = y[i] > 0.0 ? y[i] / (ybar[i] + r[i]) : 0.0;
        std::vector<double> grad = matvec_transpose(a, ratio);
        for (std::size_t j = 0; j < J; ++j) grad[j] = sigma[j] - grad[j];
        if (beta > 0.0) {
            std::vector<double> u = matvec(g, f);
            for (std::size_t b = 0; b * len < u.size(); ++b) {
                double sq = 0.0;
                for (std::size_t k = b * len; k < (b + 1) * len; ++k) sq += (w[k] * u[k]) * (w[k] * u[k]);
                const double norm = std::sqrt(sq + eps * eps);
                for (std::size_t k = b * len; k < (b + 1) * len; ++k) u[k] = w[k] * w[k] * u[k] / norm;
            }
            const std::vector<double> tv_grad = matvec_transpose(g, u);
            for (std::size_t j = 0; j < J; ++j) grad[j] += beta * tv_grad[j];
        }
        return grad;
    };

    double excess = 0.0, sigma_total = 0.0;
    for (std::size_t i = 0; i < I; ++i) excess += std::max(y[i] - r[i], 0.0);
    for (double s : sigma) sigma_total += s;
    std::vector<double> f(J, std::max(excess / sigma_total, 1e-6));

    std::vector<double> trial(J);
    for (; eps >= 1e-8 * 0.999; eps *= 0.1) {
        double value = objective(f);
        std::vector<double> grad = gradient(f);
        double step = 1e-3;
        int quiet = 0;
        bool done = false;
        for (int it = 0; it < 200000 && !done; ++it) {
            double t = step;
            double tv = inf;
            while (true) {
                double decrease = 0.0;
                for (std::size_t j = 0; j < J; ++j) {
                    trial[j] = std::max(f[j] - t * grad[j], 0.0);
                    decrease += grad[j] * (trial[j] - f[j]);
                }
                tv = objective(trial);
                if (tv <= value + 1e-4 * decrease) break;
                t *= 0.5;
                if (t < 1e-30) {
                    tv = value;
                    trial = f;
                    break;
                }
            }
            const std::vector<double> new_grad = gradient(trial);
            double sy = 0.0, ss = 0.0;
            for (std::size_t j = 0; j < J; ++j) {
                const double s = trial[j] - f[j];
                sy += s * (new_grad[j] - grad[j]);
                ss += s * s;
            }
            const double rel = std::abs(value - tv) / std::max(std::abs(value), 1e-300);
            f = trial;
            grad = new_grad;
            value = tv;
            step = (sy > 0.0 && ss > 0.0) ? std::clamp(ss / sy, 1e-20, 1e20) : std::min(step * 4.0, 1e20);
            quiet = rel <= 1e-10 ? quiet + 1 : 0;
            done = quiet >= 10 || ss == 0.0;
        }
        if (!done) throw std::runtime_error("reference_solve: iteration cap at eps = " + std::to_string(eps));
    }

    ReferenceSolution out;
    out.objective = dense_penalized_objective(a, g, y, r, w, beta, grid, N, reg, f);
    out.f = std::move(f);
    return out;
}

}  // namespace oracle
