#pragma once

#include <span>
#include <vector>

namespace ccx {

/// Type-1 empirical quantile: the order statistic at 1-based rank ceil(q * N),
/// clamped to [1, N]. Used everywhere a sample quantile is taken (trimming
/// thresholds, knots, contrast levels, credible intervals).
double quantile_type1(std::span<const double> sample, double q);

/// Same rule applied to an already ascending sample.
double quantile_type1_sorted(std::span<const double> sorted, double q);

/// 1-based rank used by quantile_type1 for a sample of size n.
std::size_t quantile_rank(std::size_t n, double q);

}  // namespace ccx
