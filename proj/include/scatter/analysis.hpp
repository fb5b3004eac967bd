#pragma once

// Post-processing of reconstructed images into plot-ready quantities and
// quality metrics against a known truth.

#include <cstddef>
#include <span>
#include <vector>

#include "scatter/grid.hpp"

namespace scatter {

/// out(s) = sum_q f(s, q)
std::vector<double> spatial_distribution(const HyperImage& f);

/// sqrt(x / max(x)), for display of values near zero. Throws ValidationError
/// if the maximum is not positive.
std::vector<double> display_transform(std::span<const double> spatial);

struct ExtractedProfile {
    std::size_t spatial_bin = 0;
    std::vector<double> spectrum;  // unit l2 energy
};

/// Profile at the argmax of the spatial distribution (ties go to the smaller
/// index), normalized to unit energy.
ExtractedProfile mtp_extract(const HyperImage& f);

/// RMSE between the spatial distributions of estimate and truth.
double spatial_rmse(const HyperImage& estimate, const HyperImage& truth);

/// RMSE between unit-energy profiles over the truth's support (spatial bins with
/// a positive spatial sum). A zero estimated profile counts as the zero vector.
double spectral_rmse(const HyperImage& estimate, const HyperImage& truth);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace scatter
