#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cfolio {

// Midranks of a sample: smallest value gets rank 1; tied values share the
// average of the ranks they occupy (so entries may be half-integers).
struct RankVector {
    std::vector<double> ranks;
    bool has_ties = false;
};

RankVector ranks(std::span<const double> x);

double pearson(std::span<const double> x, std::span<const double> y);

// Pearson correlation of midranks.
double spearman(std::span<const double> x, std::span<const double> y);

// Tie-adjusted Kendall tau-b, O(n log n).
double kendall_tau(std::span<const double> x, std::span<const double> y);

// Anderson-Darling test of uniformity on (0, 1).
struct AdResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

AdResult ad_uniform_test(std::span<const double> u);

// Adjusted Fisher-Pearson skewness: g1 * sqrt(n(n-1)) / (n-2) with
// g1 = m3 / m2^(3/2). Requires n >= 3 and nonzero variance.
double sample_skewness(std::span<const double> x);

// Sample mean and (n-1)-normalized standard deviation.
struct Moments {
    double mean = 0.0;
    double sd = 0.0;
};

Moments sample_moments(std::span<const double> x);

}  // namespace cfolio
