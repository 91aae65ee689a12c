#include <cmath>
#include <random>

#include "doctest.h"

#include "ccx/error.hpp"
#include "ccx/sampler.hpp"

using namespace ccx;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<MatrixXd> informative_sets(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const VectorXd truth = (VectorXd(2) << 0.5, -0.3).finished();
  std::vector<MatrixXd> sets;
  for (int s = 0; s < n; ++s) {
    MatrixXd m(4, 2);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
    const VectorXd w = (m * truth).array().exp();
    double pick = u(rng) * w.sum();
    int c = 0;
    while (c < 3 && pick > w(c)) pick -= w(c++);
    m.row(0).swap(m.row(c));
    sets.push_back(m);
  }
  return sets;
}

SamplerConfig config(std::uint64_t seed, int warmup, int draws) {
  SamplerConfig c;
  c.seed = seed;
  c.warmup = warmup;
  c.draws = draws;
  return c;
}

}  // namespace

TEST_CASE("with a flat likelihood the posterior is the prior") {
  std::vector<MatrixXd> sets(10, MatrixXd::Constant(4, 2, 2.0));
  const auto fit = fit_bayes(ConditionalLikelihood(sets), PriorSpec::isotropic(1.0), config(3, 1000, 4000));
  CHECK(fit.mode == FitMode::bayes);
  CHECK(fit.draws.rows() == 4 * 4000);
  for (int k = 0; k < 2; ++k) {
    CHECK(std::abs(fit.point(k)) <= 3 * fit.bayes.mcse(k));
    CHECK(std::sqrt(fit.covariance(k, k)) == doctest::Approx(1.0).epsilon(0.1));
    CHECK(fit.bayes.rhat(k) <= 1.05);
  }
  CHECK(fit.bayes.acceptance_rate > 0.5);
  CHECK(fit.bayes.acceptance_rate <= 1.0);
}

TEST_CASE("same seed gives identical draws, different seeds do not") {
  ConditionalLikelihood lik(informative_sets(1, 300));
  const auto prior = PriorSpec::isotropic(10.0);
  const auto a = fit_bayes(lik, prior, config(42, 300, 300));
  const auto b = fit_bayes(lik, prior, config(42, 300, 300));
  const auto c = fit_bayes(lik, prior, config(43, 300, 300));
  CHECK(a.draws == b.draws);
  CHECK(a.draws != c.draws);
}

TEST_CASE("posterior mean tracks the MLE on informative data") {
  ConditionalLikelihood lik(informative_sets(2, 3000));
  const auto mle = fit_mle(lik);
  const auto bayes = fit_bayes(lik, PriorSpec::isotropic(10.0), config(7, 1000, 1000));
  const VectorXd se = mle.standard_errors();
  for (int k = 0; k < 2; ++k) {
    CHECK(std::abs(bayes.point(k) - mle.point(k)) < 0.5 * se(k));
    CHECK(bayes.bayes.rhat(k) <= 1.05);
  }
  CHECK(bayes.bayes.converged);
  CHECK(bayes.bayes.warnings.empty());
}

TEST_CASE("Monte Carlo error shrinks as draws grow") {
  // MCSE scales as 1/sqrt(S): quadrupling S halves it.
  ConditionalLikelihood lik(informative_sets(4, 500));
  const auto prior = PriorSpec::isotropic(10.0);
  const auto small = fit_bayes(lik, prior, config(11, 1000, 1000));
  const auto large = fit_bayes(lik, prior, config(11, 1000, 4000));
  for (int k = 0; k < 2; ++k) {
    const double ratio = small.bayes.mcse(k) / large.bayes.mcse(k);
    CHECK(ratio == doctest::Approx(2.0).epsilon(0.3));
  }
}

TEST_CASE("split R-hat and ESS on independent and stuck chains") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<VectorXd> iid(4, VectorXd(2000));
  for (auto& c : iid) {
    for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = z(rng);
  }
  CHECK(split_rhat(iid) < 1.01);
  CHECK(effective_sample_size(iid) == doctest::Approx(8000.0).epsilon(0.15));

  auto shifted = iid;
  shifted[0].array() += 3.0;
  CHECK(split_rhat(shifted) > 1.1);

  std::vector<VectorXd> ar(4, VectorXd(4000));
  const double phi = 0.9;
  for (auto& c : ar) {
    double x = 0.0;
    for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = x = phi * x + z(rng);
  }
  // AR(1): ESS = N (1 - phi) / (1 + phi).
  CHECK(effective_sample_size(ar) == doctest::Approx(16000.0 * 0.1 / 1.9).epsilon(0.25));
}

TEST_CASE("prior and sampler settings are validated") {
  CHECK_THROWS_AS(PriorSpec::isotropic(0.0).validate(), InputError);
  SamplerConfig one_chain;
  one_chain.chains = 1;
  CHECK_THROWS_AS(one_chain.validate(), InputError);
  SamplerConfig few;
  few.chains = 2;
  few.draws = 50;
  CHECK_THROWS_AS(few.validate(), InputError);
  const auto lin = PriorSpec::defaults_for(BasisKind::linear_interaction);
  CHECK(lin.block_sd.at("h") == 1.0);
  CHECK(PriorSpec::defaults_for(BasisKind::tensor_product).block_sd.at("h") == 10.0);
}
