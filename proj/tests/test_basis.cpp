#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"

#include "ccx/basis.hpp"
#include "ccx/error.hpp"

using namespace ccx;

namespace {

BasisSpec spec_from(std::vector<double> interior, double lo, double hi) {
  BasisSpec s;
  s.df = static_cast<int>(interior.size()) + 1;
  s.interior_knots = std::move(interior);
  s.boundary_knots = {lo, hi};
  return s;
}

double second_diff(const BasisSpec& s, int k, double x, double h) {
  return (eval_natural_cubic(s, x + h)(k) - 2 * eval_natural_cubic(s, x)(k) +
          eval_natural_cubic(s, x - h)(k)) / (h * h);
}

}  // namespace

TEST_CASE("knots at type-1 quantiles") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 0.0);
  const auto s = fit_knots(v, 3);
  CHECK(s.boundary_knots.first == 0.0);
  CHECK(s.boundary_knots.second == 99.0);
  REQUIRE(s.interior_knots.size() == 2);
  CHECK(s.interior_knots[0] == 33.0);
  CHECK(s.interior_knots[1] == 66.0);

  const auto one = fit_knots(v, 1);
  CHECK(one.interior_knots.empty());
  CHECK(one.boundary_knots == std::pair<double, double>{0.0, 99.0});

  CHECK_THROWS_AS(fit_knots(std::vector<double>(50, 3.0), 3), DegenerateDataError);
  CHECK_THROWS_AS(fit_knots(std::vector<double>{1, 2, 1, 2}, 3), DegenerateDataError);
  CHECK_THROWS_AS(spec_from({5.0, 2.0}, 0.0, 10.0).validate(), InputError);
  CHECK_THROWS_AS(spec_from({}, 3.0, 3.0).validate(), InputError);
}

TEST_CASE("natural boundary: zero curvature and linear continuation outside") {
  const auto s = spec_from({12.0, 25.0, 31.0}, 5.0, 40.0);
  for (int k = 0; k < s.df; ++k) {
    for (double x : {-20.0, 0.0, 4.5, 40.5, 60.0, 100.0}) {
      CHECK(std::abs(second_diff(s, k, x, 0.25)) < 1e-8);
    }
    // Points beyond the upper boundary lie on the tangent line there.
    const double h = 1e-5;
    const double b = s.boundary_knots.second;
    const double slope = (eval_natural_cubic(s, b)(k) - eval_natural_cubic(s, b - h)(k)) / h;
    for (double x : {45.0, 70.0}) {
      const double line = eval_natural_cubic(s, b)(k) + slope * (x - b);
      CHECK(eval_natural_cubic(s, x)(k) == doctest::Approx(line).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("C2 continuity at interior knots on random specs") {
  // Central second differences are exact on a cubic piece, and the second
  // derivative is linear there, so each side extrapolates exactly to the knot.
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  while (checked < 20) {
    const double lo = 10 * u(rng), hi = lo + 5 + 40 * u(rng);
    const double h = 1e-3 * (hi - lo);
    std::set<double> inner;
    const int n = 1 + checked % 4;
    while (static_cast<int>(inner.size()) < n) inner.insert(lo + (hi - lo) * (0.1 + 0.8 * u(rng)));
    std::vector<double> knots{inner.begin(), inner.end()};
    bool spaced = true;
    for (std::size_t i = 1; i < knots.size(); ++i) spaced = spaced && knots[i] - knots[i - 1] > 12 * h;
    if (!spaced) continue;
    ++checked;
    const auto s = spec_from(knots, lo, hi);
    for (double knot : s.interior_knots) {
      for (int k = 0; k < s.df; ++k) {
        const double left = 2 * second_diff(s, k, knot - 2 * h, h) - second_diff(s, k, knot - 4 * h, h);
        const double right = 2 * second_diff(s, k, knot + 2 * h, h) - second_diff(s, k, knot + 4 * h, h);
        const double scale = std::max({std::abs(left), std::abs(right), 1.0 / ((hi - lo) * (hi - lo))});
        CHECK(std::abs(left - right) <= 1e-6 * scale);
        CHECK(std::abs(eval_natural_cubic(s, knot + 1e-6)(k) - eval_natural_cubic(s, knot - 1e-6)(k)) < 1e-5);
      }
    }
  }
}

TEST_CASE("linear functions are reproduced exactly by least squares") {
  const auto s = spec_from({3.0, 7.0}, 0.0, 10.0);
  const int n = 200;
  Eigen::MatrixXd X(n, s.df + 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double x = -2.0 + 14.0 * i / (n - 1);
    X(i, 0) = 1.0;
    X.row(i).tail(s.df) = eval_natural_cubic(s, x).transpose();
    y(i) = 1.75 - 0.4 * x;
  }
  const Eigen::VectorXd coef = X.colPivHouseholderQr().solve(y);
  CHECK((X * coef - y).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("interaction bases") {
  InteractionSpec lin{BasisKind::linear_interaction, spec_from({}, 0, 1), spec_from({}, 0, 1)};
  const auto v = eval_interaction(lin, 2.0, 3.0);
  REQUIRE(v.size() == 1);
  CHECK(v(0) == 6.0);

  InteractionSpec ten{BasisKind::tensor_product, spec_from({20.0, 30.0}, 10.0, 40.0),
                      spec_from({6.0, 12.0}, 1.0, 35.0)};
  CHECK(ten.dimension() == 9);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> t(5, 45), a(0, 40);
  for (int i = 0; i < 200; ++i) {
    const double ti = t(rng), ai = a(rng);
    const auto ft = eval_natural_cubic(ten.temperature, ti);
    const auto ga = eval_natural_cubic(ten.pm25, ai);
    const auto w = eval_interaction(ten, ti, ai);
    REQUIRE(w.size() == 9);
    for (int p = 0; p < 3; ++p) {
      for (int q = 0; q < 3; ++q) CHECK(w(3 * p + q) == ft(p) * ga(q));
    }
  }
}

TEST_CASE("model basis layout and design assembly") {
  ModelBasis mb{spec_from({20.0, 30.0}, 10.0, 40.0), spec_from({6.0, 12.0}, 1.0, 35.0),
                BasisKind::tensor_product};
  CHECK(mb.dimension() == 15);
  const auto labels = mb.labels();
  CHECK(std::set<std::string>(labels.begin(), labels.end()).size() == labels.size());
  CHECK(labels.front() == "f[1]");
  const auto blocks = mb.blocks();
  REQUIRE(blocks.size() == 3);
  CHECK(blocks[2].name == "h");
  CHECK(blocks[2].begin == 6);
  CHECK(blocks[2].size == 9);

  ModelBasis linear{mb.temperature, mb.pm25, BasisKind::linear_interaction};
  CHECK(linear.dimension() == 7);
  CHECK(linear.labels().back() == "h[TxA]");
  CHECK(linear.row(30.0, 10.0)(6) == 300.0);

  std::vector<MatchedSet> sets{
      {"a", {{Date(2010, 7, 1), false, 25, 4}, {Date(2010, 7, 8), true, 33, 9}}},
      {"b", {{Date(2010, 8, 2), true, 28, 12}, {Date(2010, 8, 9), false, 31, 7}, {Date(2010, 8, 16), false, 19, 2}}}};
  const auto d = build_design(sets, mb);
  CHECK(d.x.rows() == 5);
  CHECK(d.x.cols() == 15);
  CHECK(d.sets() == 2);
  CHECK(d.set_begin == std::vector<std::size_t>{0, 2, 5});
  CHECK(d.case_rows == std::vector<std::size_t>{1, 2});
  CHECK((d.x.row(3).transpose() - mb.row(31, 7)).norm() == 0.0);
  CHECK(d.labels == labels);
}
