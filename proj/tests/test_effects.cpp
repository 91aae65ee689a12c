#include <cmath>
#include <random>

#include "doctest.h"

#include "ccx/effects.hpp"
#include "ccx/error.hpp"

using namespace ccx;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

BasisSpec linear_spec(double lo, double hi) {
  BasisSpec s;
  s.df = 1;
  s.boundary_knots = {lo, hi};
  return s;
}

// f and g linear in the exposures, plus gamma * T * A.
ModelBasis linear_model() {
  return {linear_spec(20.0, 40.0), linear_spec(2.0, 30.0), BasisKind::linear_interaction};
}

FitResult bayes_fit(const MatrixXd& draws) {
  FitResult f;
  f.mode = FitMode::bayes;
  f.draws = draws;
  f.point = draws.colwise().mean().transpose();
  f.covariance = MatrixXd::Identity(draws.cols(), draws.cols());
  return f;
}

FitResult mle_fit(const VectorXd& point, const MatrixXd& cov) {
  FitResult f;
  f.mode = FitMode::mle;
  f.point = point;
  f.covariance = cov;
  return f;
}

MatrixXd random_draws(std::uint64_t seed, int n, int dim, double sd, bool zero_h) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, sd);
  MatrixXd d(n, dim);
  for (Eigen::Index i = 0; i < d.size(); ++i) d.data()[i] = z(rng);
  // Interaction coefficients act on T*A, hundreds of units.
  d.col(dim - 1) *= zero_h ? 0.0 : 1e-3;
  return d;
}

const ContrastLevels kLevels{28.0, 36.0, 8.0, 20.0, LevelProvenance::user};

}  // namespace

TEST_CASE("odds ratios follow the linear predictor difference") {
  const auto mb = linear_model();
  const VectorXd beta = (VectorXd(3) << 0.6, 0.28, 0.002).finished();
  const auto fit = mle_fit(beta, MatrixXd::Identity(3, 3) * 1e-4);
  // Independent oracle in exposure units.
  const double bt = 0.6 / 20.0, ba = 0.28 / 28.0, g = 0.002;
  const double or10 = std::exp(bt * 8.0 + g * 8.0 * 8.0);
  const double or01 = std::exp(ba * 12.0 + g * 28.0 * 12.0);
  const double or11 = std::exp(bt * 8.0 + ba * 12.0 + g * (36.0 * 20.0 - 28.0 * 8.0));
  CHECK(or_contrast(fit, mb, EffectName::OR10, kLevels).point == doctest::Approx(or10).epsilon(1e-13));
  CHECK(or_contrast(fit, mb, EffectName::OR01, kLevels).point == doctest::Approx(or01).epsilon(1e-13));
  CHECK(or_contrast(fit, mb, EffectName::OR11, kLevels).point == doctest::Approx(or11).epsilon(1e-13));
  CHECK(reri(fit, mb, kLevels).point == doctest::Approx(or11 - or10 - or01 + 1).epsilon(1e-12));
  CHECK_FALSE(or_contrast(fit, mb, EffectName::OR10, kLevels).extrapolated);
  const ContrastLevels outside{28.0, 45.0, 8.0, 20.0, LevelProvenance::user};
  CHECK(or_contrast(fit, mb, EffectName::OR10, outside).extrapolated);
}

TEST_CASE("Wald interval on the log scale") {
  const auto mb = linear_model();
  MatrixXd cov(3, 3);
  cov << 0.04, 0.001, 0.0, 0.001, 0.09, 0.0, 0.0, 0.0, 1e-6;
  const auto fit = mle_fit(VectorXd::Zero(3), cov);
  const auto e = or_contrast(fit, mb, EffectName::OR10, kLevels);
  VectorXd c(3);
  c << 8.0 / 20.0, 0.0, 8.0 * 8.0;
  const double se = std::sqrt(c.dot(cov * c));
  CHECK(e.point == 1.0);
  CHECK(e.lo95 == doctest::Approx(std::exp(-1.959963984540054 * se)).epsilon(1e-13));
  CHECK(e.hi95 == doctest::Approx(std::exp(1.959963984540054 * se)).epsilon(1e-13));
}

TEST_CASE("null coefficients give unit odds ratios and zero RERI") {
  const auto mb = linear_model();
  for (const auto& fit : {mle_fit(VectorXd::Zero(3), MatrixXd::Identity(3, 3)),
                          bayes_fit(MatrixXd::Zero(100, 3))}) {
    for (auto which : {EffectName::OR10, EffectName::OR01, EffectName::OR11}) {
      CHECK(or_contrast(fit, mb, which, kLevels).point == 1.0);
    }
    CHECK(reri(fit, mb, kLevels).point == 0.0);
    CHECK(mult_interaction(fit, mb).point == 1.0);
  }
}

TEST_CASE("RERI is computed draw by draw") {
  const auto mb = linear_model();
  const auto fit = bayes_fit(random_draws(1, 2000, 3, 0.2, false));
  const auto r = reri(fit, mb, kLevels);
  const auto o10 = or_contrast(fit, mb, EffectName::OR10, kLevels);
  const auto o01 = or_contrast(fit, mb, EffectName::OR01, kLevels);
  const auto o11 = or_contrast(fit, mb, EffectName::OR11, kLevels);
  REQUIRE(r.per_draw.size() == 2000);
  for (std::size_t s = 0; s < r.per_draw.size(); ++s) {
    CHECK(r.per_draw[s] == o11.per_draw[s] - o10.per_draw[s] - o01.per_draw[s] + 1.0);
  }
  CHECK(r.lo95 <= r.point);
  CHECK(r.point <= r.hi95);
}

TEST_CASE("without interaction RERI factorizes per draw") {
  const auto mb = linear_model();
  const auto fit = bayes_fit(random_draws(2, 2000, 3, 0.3, true));
  const auto r = reri(fit, mb, kLevels);
  const auto o10 = or_contrast(fit, mb, EffectName::OR10, kLevels);
  const auto o01 = or_contrast(fit, mb, EffectName::OR01, kLevels);
  for (std::size_t s = 0; s < r.per_draw.size(); ++s) {
    const double expect = (o10.per_draw[s] - 1.0) * (o01.per_draw[s] - 1.0);
    CHECK(std::abs(r.per_draw[s] - expect) <= 1e-12 * std::max(1.0, std::abs(expect)));
  }
}

TEST_CASE("multiplicative interaction") {
  const auto mb = linear_model();
  MatrixXd d = MatrixXd::Zero(50, 3);
  d.col(2).setConstant(std::log(2.0));
  const auto e = mult_interaction(bayes_fit(d), mb);
  CHECK(e.point == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(e.lo95 == doctest::Approx(2.0).epsilon(1e-15));

  ModelBasis tensor{linear_spec(20, 40), linear_spec(2, 30), BasisKind::tensor_product};
  CHECK_THROWS_AS(mult_interaction(bayes_fit(MatrixXd::Zero(10, 3)), tensor), UnsupportedModelError);
}

TEST_CASE("contrast levels come from case days only") {
  std::vector<MatchedSet> sets;
  for (int i = 1; i <= 100; ++i) {
    sets.push_back({"s" + std::to_string(i),
                    {{Date(2010, 7, 1), false, 1000.0, 1000.0},
                     {Date(2010, 7, 8), true, static_cast<double>(i), 200.0 - i}}});
  }
  const auto lv = case_day_levels(sets);
  CHECK(lv.t0 == 50.0);
  CHECK(lv.t1 == 95.0);
  CHECK(lv.a0 == 149.0);
  CHECK(lv.a1 == 194.0);
  CHECK(lv.provenance == LevelProvenance::case_day_median_p95);
}

TEST_CASE("curves and surfaces are unity at the reference") {
  const auto mb = linear_model();
  const auto fit = bayes_fit(random_draws(3, 500, 3, 0.2, false));
  const auto grid = linear_grid(20.0, 40.0, 21);
  CHECK(grid.size() == 21);
  CHECK(grid[10] == 30.0);
  const auto curve = response_curve(fit, mb, ExposureKind::temperature_max, 8.0, grid, 30.0);
  CHECK(curve[10].odds_ratio == 1.0);
  CHECK(curve[10].a == 8.0);
  const auto agrid = linear_grid(2.0, 30.0, 8);
  const auto surf = risk_surface(fit, mb, grid, agrid, 30.0, 2.0);
  CHECK(surf.size() == 21 * 8);
  CHECK(surf[10 * 8].odds_ratio == 1.0);
  CHECK(surf[10 * 8 + 1].t == 30.0);
  CHECK(surf[10 * 8 + 1].a == agrid[1]);
  const auto tensorless = or_contrast(fit, mb, EffectName::OR11,
                                      {30.0, grid[15], 2.0, agrid[5], LevelProvenance::user});
  CHECK(surf[15 * 8 + 5].odds_ratio == doctest::Approx(tensorless.point).epsilon(1e-14));
}
