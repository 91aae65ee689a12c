#include "ccx/quantile.hpp"

#include <algorithm>
#include <cmath>

#include "ccx/error.hpp"

namespace ccx {

std::size_t quantile_rank(std::size_t n, double q) {
  // q * n is nudged down so that e.g. 0.95 * 100 lands on rank 95, not 96.
  const double raw = std::ceil(q * static_cast<double>(n) - 1e-9);
  const auto rank = static_cast<long long>(raw);
  return static_cast<std::size_t>(std::clamp<long long>(rank, 1, static_cast<long long>(n)));
}

double quantile_type1_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw EmptyAnalysisError("quantile of an empty sample");
  if (!(q > 0.0 && q <= 1.0)) throw InputError("quantile level must lie in (0, 1]");
  return sorted[quantile_rank(sorted.size(), q) - 1];
}

double quantile_type1(std::span<const double> sample, double q) {
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  return quantile_type1_sorted(sorted, q);
}

}  // namespace ccx
