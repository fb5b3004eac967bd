#pragma once

// Minimal fork-join helpers over index ranges.
//
// parallel_for hands out disjoint [begin, end) ranges. parallel_sum in
// deterministic mode splits the range into fixed-size blocks independent of the
// thread count and adds the block partials in block order, so the result is
// bit-identical for any number of workers.

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace scatter {

struct Exec {
    unsigned threads = 1;
    bool deterministic = true;
};

inline constexpr std::size_t kMinParallelItems = 4096;
inline constexpr std::size_t kReductionBlock = 1024;

template <typename Body>
void parallel_for(const Exec& exec, std::size_t n, Body&& body) {
    const std::size_t workers =
        std::min<std::size_t>(std::max(1u, exec.threads), std::max<std::size_t>(1, n / kMinParallelItems));
    if (workers <= 1) {
        if (n > 0) body(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = std::min(n, w * chunk);
        const std::size_t end = std::min(n, begin + chunk);
        pool.emplace_back([&, w, begin, end] {
            try {
                if (begin < end) body(begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Sum of partial(begin, end) over a partition of [0, n).
template <typename Partial>
double parallel_sum(const Exec& exec, std::size_t n, Partial&& partial) {
    if (exec.deterministic) {
        const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
        std::vector<double> sums(blocks, 0.0);
        parallel_for(exec, blocks, [&](std::size_t b0, std::size_t b1) {
            for (std::size_t b = b0; b < b1; ++b)
                sums[b] = partial(b * kReductionBlock, std::min(n, (b + 1) * kReductionBlock));
        });
        double total = 0.0;
        for (double s : sums) total += s;
        return total;
    }
    // One contiguous chunk per worker: the summation order follows the thread count.
    const std::size_t workers =
        std::min<std::size_t>(std::max(1u, exec.threads), std::max<std::size_t>(1, n / kMinParallelItems));
    std::vector<double> sums(workers, 0.0);
    const std::size_t chunk = (n + workers - 1) / workers;
    parallel_for(exec, workers * kMinParallelItems, [&](std::size_t w0, std::size_t w1) {
        for (std::size_t w = w0 / kMinParallelItems; w < w1 / kMinParallelItems; ++w) {
            const std::size_t begin = std::min(n, w * chunk);
            const std::size_t end = std::min(n, begin + chunk);
            if (begin < end) sums[w] = partial(begin, end);
        }
    });
    double total = 0.0;
    for (double s : sums) total += s;
    return total;
}

}  // namespace scatter
