#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ccx/crossover_design.hpp"

namespace ccx {

enum class BasisKind { natural_cubic, tensor_product, linear_interaction };

std::string to_string(BasisKind kind);

/// Knot layout of a natural cubic spline. A spline with `df` degrees of
/// freedom has df - 1 interior knots and spans every natural cubic spline on
/// those knots modulo constants (constants cancel within a matched set).
struct BasisSpec {
  BasisKind kind = BasisKind::natural_cubic;
  int df = 3;
  std::vector<double> interior_knots;
  std::pair<double, double> boundary_knots{0.0, 1.0};

  /// Throws InputError on inconsistent knots.
  void validate() const;
  bool inside(double x) const {
    return x >= boundary_knots.first && x <= boundary_knots.second;
  }
};

/// Boundary knots at the sample extremes; interior knots at type-1 quantiles
/// k/df, k = 1..df-1. Throws DegenerateDataError when the sample cannot carry
/// strictly increasing knots.
BasisSpec fit_knots(std::span<const double> values, int df);

/// The df basis values at x. Linear beyond the boundary knots.
Eigen::VectorXd eval_natural_cubic(const BasisSpec& spec, double x);

/// Interaction term: `kind` is linear_interaction (the single product t*a) or
/// tensor_product (row-major outer product of the marginal bases).
struct InteractionSpec {
  BasisKind kind = BasisKind::linear_interaction;
  BasisSpec temperature;
  BasisSpec pm25;

  int dimension() const {
    return kind == BasisKind::linear_interaction ? 1 : temperature.df * pm25.df;
  }
};

Eigen::VectorXd eval_interaction(const InteractionSpec& spec, double t, double a);

struct Block {
  std::string name;  // "f", "g" or "h"
  int begin = 0;
  int size = 0;
};

/// The full linear predictor basis f(T) + g(A) + h(T, A).
struct ModelBasis {
  BasisSpec temperature;
  BasisSpec pm25;
  BasisKind interaction = BasisKind::linear_interaction;

  int dimension() const;
  std::vector<Block> blocks() const;
  /// Unique per column: f[i], g[j], h[TxA] or h[i,j].
  std::vector<std::string> labels() const;
  InteractionSpec interaction_spec() const { return {interaction, temperature, pm25}; }

  Eigen::VectorXd row(double t, double a) const;
};

/// Realized covariates for every day row, grouped by matched set. Rows of a set
/// are contiguous; the case row of set s is `case_rows[s]`.
struct DesignMatrix {
  Eigen::MatrixXd x;
  std::vector<std::size_t> set_begin;  // size = sets + 1
  std::vector<std::size_t> case_rows;
  std::vector<std::string> labels;
  std::vector<Block> blocks;

  std::size_t sets() const { return case_rows.size(); }
};

DesignMatrix build_design(std::span<const MatchedSet> sets, const ModelBasis& basis);

}  // namespace ccx
