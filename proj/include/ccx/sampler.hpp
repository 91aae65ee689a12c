#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ccx/clr.hpp"

namespace ccx {

/// Independent zero-mean Gaussian priors, one sd per coefficient block.
struct PriorSpec {
  std::map<std::string, double> block_sd{{"f", 10.0}, {"g", 10.0}, {"h", 1.0}};
  /// For blocks not listed above.
  double fallback_sd = 10.0;

  /// Defaults: sd 10 on spline and tensor blocks, sd 1 on a linear T*A term.
  static PriorSpec defaults_for(BasisKind interaction);
  static PriorSpec isotropic(double sd);

  Eigen::VectorXd sd_vector(const std::vector<Block>& blocks, int dimension) const;
  void validate() const;
};

struct SamplerConfig {
  int chains = 4;
  int warmup = 1000;
  /// Post-warmup draws per chain.
  int draws = 1000;
  std::uint64_t seed = 1;
  double rhat_threshold = 1.05;
  /// Minimum total retained draws (chains * draws).
  int min_total_draws = 200;

  void validate() const;
};

/// Hamiltonian Monte Carlo on standardized coefficients with a dense metric
/// started from the Laplace approximation. Chains start from an overdispersed
/// draw around the posterior mode and run in parallel; metric and step size
/// adapt during warmup only. Identical seed and config give bit-identical
/// draws.
FitResult fit_bayes(const ConditionalLikelihood& lik, const PriorSpec& prior,
                    const SamplerConfig& config);

/// Split R-hat over chains of equal length.
double split_rhat(std::span<const Eigen::VectorXd> chains);

/// Multi-chain effective sample size (Geyer initial monotone sequence on the
/// combined autocorrelation).
double effective_sample_size(std::span<const Eigen::VectorXd> chains);

}  // namespace ccx
