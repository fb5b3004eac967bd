#include "scatter/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace scatter {

namespace {

void require_same_grid(const HyperImage& a, const HyperImage& b) {
    if (!(a.grid() == b.grid())) throw ValidationError("estimate and truth images have different grids");
}

double l2(std::span<const double> v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

}  // namespace

std::vector<double> spatial_distribution(const HyperImage& f) {
    std::vector<double> out(f.grid().num_spatial());
    for (std::size_t s = 0; s < out.size(); ++s) {
        const auto row = f.profile(s);
        out[s] = std::accumulate(row.begin(), row.end(), 0.0);
    }
    return out;
}

std::vector<double> display_transform(std::span<const double> spatial) {
    if (spatial.empty()) throw ValidationError("display transform of an empty vector");
    const double peak = *std::max_element(spatial.begin(), spatial.end());
    if (!(peak > 0.0)) throw ValidationError("display transform needs a positive maximum");
    std::vector<double> out(spatial.size());
    for (std::size_t s = 0; s < out.size(); ++s) out[s] = std::sqrt(std::max(spatial[s], 0.0) / peak);
    return out;
}

ExtractedProfile mtp_extract(const HyperImage& f) {
    const auto dist = spatial_distribution(f);
    // max_element returns the first maximum.
    const auto best = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
    const auto row = f.profile(best);
    const double norm = l2(row);
    if (!(norm > 0.0)) throw ValidationError("spatial distribution is all zero; no profile to extract");
    ExtractedProfile out{best, std::vector<double>(row.begin(), row.end())};
    for (double& v : out.spectrum) v /= norm;
    return out;
}

double spatial_rmse(const HyperImage& estimate, const HyperImage& truth) {
    require_same_grid(estimate, truth);
    const auto a = spatial_distribution(estimate);
    const auto b = spatial_distribution(truth);
    double sq = 0.0;
    for (std::size_t s = 0; s < a.size(); ++s) sq += (a[s] - b[s]) * (a[s] - b[s]);
    return std::sqrt(sq / static_cast<double>(a.size()));
}

double spectral_rmse(const HyperImage& estimate, const HyperImage& truth) {
    require_same_grid(estimate, truth);
    const auto support = spatial_distribution(truth);
    const std::size_t Q = truth.grid().num_q();
    double sq = 0.0;
    std::size_t count = 0;
    for (std::size_t s = 0; s < support.size(); ++s) {
        if (!(support[s] > 0.0)) continue;
        const auto est = estimate.profile(s);
        const auto ref = truth.profile(s);
        const double ne = l2(est);
        const double nr = l2(ref);
        for (std::size_t q = 0; q < Q; ++q) {
            const double a = ne > 0.0 ? est[q] / ne : 0.0;
            const double diff = a - ref[q] / nr;
            sq += diff * diff;
        }
        count += Q;
    }
    if (count == 0) throw ValidationError("truth image has empty support");
    return std::sqrt(sq / static_cast<double>(count));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ValidationError("cosine similarity of vectors with different lengths");
    const double na = l2(a);
    const double nb = l2(b);
    if (!(na > 0.0) || !(nb > 0.0)) return 0.0;
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0) / (na * nb);
}

}  // namespace scatter
