#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ccx/basis.hpp"

namespace ccx {

/// Conditional logistic likelihood over matched sets. Each set contributes
///   x_case . beta - log sum_j exp(x_j . beta),
/// which is evaluated on differences x_j - x_case so that any constant added
/// to every row of a set cancels before the dot product.
class ConditionalLikelihood {
 public:
  /// One matrix per set; row 0 is the case, remaining rows the controls.
  explicit ConditionalLikelihood(const std::vector<Eigen::MatrixXd>& sets);
  explicit ConditionalLikelihood(const DesignMatrix& design);

  int dimension() const { return static_cast<int>(diffs_.cols()); }
  std::size_t sets() const { return begin_.size() - 1; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<Block>& blocks() const { return blocks_; }

  double log_likelihood(const Eigen::VectorXd& beta) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& beta) const;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& beta) const;

  struct Evaluation {
    double value = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;  // empty unless requested
  };
  Evaluation evaluate(const Eigen::VectorXd& beta, bool with_hessian) const;

  /// Pooled standard deviation of each column over all rows (1 where a
  /// column is constant). Used to put coefficients on a common scale.
  const Eigen::VectorXd& column_scale() const { return scale_; }

  /// Same likelihood on columns divided by `scale`: ll_scaled(beta * scale)
  /// equals ll(beta).
  ConditionalLikelihood rescaled(const Eigen::VectorXd& scale) const;

  /// Columns with no within-set variation anywhere; they carry no information.
  std::vector<int> zero_information_columns() const;

  /// Keeps only the listed columns.
  ConditionalLikelihood restricted(const std::vector<int>& columns) const;

 private:
  ConditionalLikelihood() = default;
  void finish();

  // Control-row differences x_j - x_case, stacked; set s owns rows
  // [begin_[s], begin_[s + 1]).
  Eigen::MatrixXd diffs_;
  std::vector<Eigen::Index> begin_;
  Eigen::VectorXd scale_;
  std::vector<std::string> labels_;
  std::vector<Block> blocks_;
};

enum class FitMode { mle, bayes };

struct MleDiagnostics {
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool ridge_used = false;
  /// Coefficients fixed at zero because their column has no within-set contrast.
  std::vector<int> zero_information;
};

struct BayesDiagnostics {
  Eigen::VectorXd rhat;
  Eigen::VectorXd ess;
  Eigen::VectorXd mcse;
  double acceptance_rate = 0.0;
  /// True when every R-hat is at or below the configured threshold.
  bool converged = false;
  std::vector<std::string> warnings;
};

struct FitResult {
  FitMode mode = FitMode::mle;
  std::vector<std::string> labels;
  std::vector<Block> blocks;
  /// MLE or posterior mean.
  Eigen::VectorXd point;
  /// Inverse observed information (MLE) or posterior covariance (bayes).
  Eigen::MatrixXd covariance;
  /// S x dimension, bayes only.
  Eigen::MatrixXd draws;
  MleDiagnostics mle;
  BayesDiagnostics bayes;

  Eigen::VectorXd standard_errors() const;
  int dimension() const { return static_cast<int>(point.size()); }
};

struct MleOptions {
  double tolerance = 1e-8;
  int max_iter = 200;
  /// Sup-norm bound on standardized coefficients beyond which the likelihood
  /// is treated as unbounded.
  double separation_bound = 50.0;
  double ridge = 1e-8;
};

/// Newton-Raphson with step halving on standardized columns. Throws
/// SeparationError or NumericalError.
FitResult fit_mle(const ConditionalLikelihood& lik, const MleOptions& options = {});

namespace detail {

/// Newton maximisation of ll(theta) - 0.5 * theta' P theta with diagonal
/// penalty P (zero for plain MLE). Works on whatever columns `lik` holds.
struct NewtonOutcome {
  Eigen::VectorXd theta;
  Eigen::MatrixXd information;  // negative Hessian of the objective at theta
  MleDiagnostics diagnostics;
};
NewtonOutcome newton_maximize(const ConditionalLikelihood& lik, const Eigen::VectorXd& penalty,
                              const MleOptions& options);

}  // namespace detail

}  // namespace ccx
