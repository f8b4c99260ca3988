#pragma once

// Energy distance between two sample sets stored row-major.

#include <span>

#include "ikl/common.hpp"

namespace ikl {

/// 2 E|A - B| - E|A - A'| - E|B - B'| with the within-set terms averaged over
/// distinct pairs (U-statistic). Can be slightly negative for close
/// distributions.
double energy_distance(std::span<const double> a, std::span<const double> b, std::size_t dim);

/// Same statistic with the within-set terms averaged over all n^2 ordered
/// pairs including i == j (V-statistic). Clamped at 0; 0 up to rounding for
/// identical multisets.
double energy_distance_v(std::span<const double> a, std::span<const double> b, std::size_t dim);

/// Paired-removal form for equal-size sets: the mean over i < j of
/// |a_i - b_j| + |a_j - b_i| - |a_i - a_j| - |b_i - b_j|. Exactly 0 when
/// a == b row for row.
double energy_distance_paired(std::span<const double> a, std::span<const double> b,
                              std::size_t dim);

/// Closed-form energy distance between N(mu_a, s_a^2) and N(mu_b, s_b^2) in 1-D.
double gaussian_energy_distance_1d(double mu_a, double s_a, double mu_b, double s_b);

}  // namespace ikl
