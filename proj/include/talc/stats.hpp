#pragma once

#include <span>
#include <vector>

namespace talc {

/// Pearson correlation; NaN when fewer than two points or zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

/// Ranks starting at 1, ties receive the average of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace talc
