#include "ccx/clr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ccx/error.hpp"

namespace ccx {

ConditionalLikelihood::ConditionalLikelihood(const std::vector<Eigen::MatrixXd>& sets) {
  const Eigen::Index dim = sets.empty() ? 0 : sets.front().cols();
  Eigen::Index n_controls = 0;
  for (const auto& s : sets) {
    if (s.cols() != dim || s.rows() < 1) {
      throw InputError("every matched set needs a case row and a common dimension");
    }
    if (!s.allFinite()) throw InputError("non-finite covariate in matched set");
    n_controls += s.rows() - 1;
  }
  diffs_.resize(n_controls, dim);
  begin_.reserve(sets.size() + 1);
  Eigen::Index r = 0;
  // Pooled column sd over the original rows.
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim), sum_sq = Eigen::VectorXd::Zero(dim);
  Eigen::Index n_rows = 0;
  for (const auto& s : sets) {
    begin_.push_back(r);
    for (Eigen::Index j = 1; j < s.rows(); ++j) diffs_.row(r++) = s.row(j) - s.row(0);
    sum += s.colwise().sum().transpose();
    n_rows += s.rows();
  }
  begin_.push_back(r);
  const Eigen::VectorXd mean = n_rows > 0 ? Eigen::VectorXd(sum / n_rows) : sum;
  for (const auto& s : sets) {
    sum_sq += (s.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
  }
  scale_ = n_rows > 0 ? Eigen::VectorXd((sum_sq / n_rows).cwiseSqrt()) : Eigen::VectorXd::Ones(dim);
  for (Eigen::Index k = 0; k < dim; ++k) labels_.push_back("b[" + std::to_string(k + 1) + "]");
  blocks_ = {{"all", 0, static_cast<int>(dim)}};
  finish();
}

ConditionalLikelihood::ConditionalLikelihood(const DesignMatrix& design) {
  const Eigen::Index dim = design.x.cols();
  diffs_.resize(design.x.rows() - static_cast<Eigen::Index>(design.sets()), dim);
  begin_.reserve(design.sets() + 1);
  Eigen::Index r = 0;
  for (std::size_t s = 0; s < design.sets(); ++s) {
    begin_.push_back(r);
    const auto c = static_cast<Eigen::Index>(design.case_rows[s]);
    for (auto j = static_cast<Eigen::Index>(design.set_begin[s]);
         j < static_cast<Eigen::Index>(design.set_begin[s + 1]); ++j) {
      if (j != c) diffs_.row(r++) = design.x.row(j) - design.x.row(c);
    }
  }
  begin_.push_back(r);
  if (!design.x.allFinite()) throw InputError("non-finite covariate in design matrix");
  if (design.x.rows() > 0) {
    const Eigen::RowVectorXd mean = design.x.colwise().mean();
    scale_ = ((design.x.rowwise() - mean).array().square().colwise().mean()).sqrt().transpose();
  } else {
    scale_ = Eigen::VectorXd::Ones(dim);
  }
  labels_ = design.labels;
  blocks_ = design.blocks;
  finish();
}

void ConditionalLikelihood::finish() {
  for (Eigen::Index k = 0; k < scale_.size(); ++k) {
    if (!(scale_[k] > 0.0) || !std::isfinite(scale_[k])) scale_[k] = 1.0;
  }
}

namespace {

// log(1 + sum_j exp(v_j)) over the control scores v_j (the case scores 0),
// written as m + log1p(sum of the non-maximal terms) so that a dominant case
// row keeps full relative precision. Fills softmax weights of the controls.
double log_normalizer(const Eigen::Ref<const Eigen::VectorXd>& v, Eigen::VectorXd* weights) {
  Eigen::Index arg = -1;  // -1 = case row
  double m = 0.0;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (v[j] > m) {
      m = v[j];
      arg = j;
    }
  }
  double rest = arg == -1 ? 0.0 : std::exp(-m);
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (j != arg) rest += std::exp(v[j] - m);
  }
  if (weights) {
    weights->resize(v.size());
    const double denom = 1.0 + rest;
    for (Eigen::Index j = 0; j < v.size(); ++j) (*weights)[j] = std::exp(v[j] - m) / denom;
  }
  return m + std::log1p(rest);
}

}  // namespace

double ConditionalLikelihood::log_likelihood(const Eigen::VectorXd& beta) const {
  if (beta.size() != dimension()) throw InputError("coefficient dimension mismatch");
  double total = 0.0;
  const Eigen::VectorXd scores = diffs_ * beta;
  for (std::size_t s = 0; s + 1 < begin_.size(); ++s) {
    const auto n = begin_[s + 1] - begin_[s];
    total -= log_normalizer(scores.segment(begin_[s], n), nullptr);
  }
  return total;
}

ConditionalLikelihood::Evaluation ConditionalLikelihood::evaluate(const Eigen::VectorXd& beta,
                                                                  bool with_hessian) const {
  if (beta.size() != dimension()) throw InputError("coefficient dimension mismatch");
  const Eigen::Index p = dimension();
  Evaluation out;
  out.gradient = Eigen::VectorXd::Zero(p);
  if (with_hessian) out.hessian = Eigen::MatrixXd::Zero(p, p);
  const Eigen::VectorXd scores = diffs_ * beta;
  Eigen::VectorXd w;
  for (std::size_t s = 0; s + 1 < begin_.size(); ++s) {
    const auto n = begin_[s + 1] - begin_[s];
    if (n == 0) continue;
    out.value -= log_normalizer(scores.segment(begin_[s], n), &w);
    const auto d = diffs_.middleRows(begin_[s], n);
    const Eigen::VectorXd mean = d.transpose() * w;
    out.gradient -= mean;
    if (with_hessian) {
      out.hessian.noalias() -= d.transpose() * w.asDiagonal() * d;
      out.hessian.noalias() += mean * mean.transpose();
    }
  }
  if (with_hessian) out.hessian = 0.5 * (out.hessian + out.hessian.transpose()).eval();
  return out;
}

Eigen::VectorXd ConditionalLikelihood::gradient(const Eigen::VectorXd& beta) const {
  return evaluate(beta, false).gradient;
}

Eigen::MatrixXd ConditionalLikelihood::hessian(const Eigen::VectorXd& beta) const {
  return evaluate(beta, true).hessian;
}

ConditionalLikelihood ConditionalLikelihood::rescaled(const Eigen::VectorXd& scale) const {
  ConditionalLikelihood out = *this;
  out.diffs_ = diffs_ * scale.cwiseInverse().asDiagonal();
  out.scale_ = scale_.cwiseQuotient(scale);
  return out;
}

std::vector<int> ConditionalLikelihood::zero_information_columns() const {
  std::vector<int> out;
  for (Eigen::Index k = 0; k < diffs_.cols(); ++k) {
    if ((diffs_.col(k).array() == 0.0).all()) out.push_back(static_cast<int>(k));
  }
  return out;
}

ConditionalLikelihood ConditionalLikelihood::restricted(const std::vector<int>& columns) const {
  ConditionalLikelihood out;
  out.begin_ = begin_;
  out.diffs_.resize(diffs_.rows(), static_cast<Eigen::Index>(columns.size()));
  out.scale_.resize(static_cast<Eigen::Index>(columns.size()));
  for (std::size_t i = 0; i < columns.size(); ++i) {
    out.diffs_.col(static_cast<Eigen::Index>(i)) = diffs_.col(columns[i]);
    out.scale_[static_cast<Eigen::Index>(i)] = scale_[columns[i]];
    out.labels_.push_back(labels_[columns[i]]);
  }
  out.blocks_ = {{"restricted", 0, static_cast<int>(columns.size())}};
  return out;
}

Eigen::VectorXd FitResult::standard_errors() const {
  return covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
}

namespace detail {
namespace {

struct Factored {
  Eigen::MatrixXd matrix;
  bool ridged = false;
  bool singular = false;
};

// Positive-definiteness judged relative to the largest eigenvalue so that a
// uniformly tiny but well-conditioned information matrix is not mistaken for
// a singular one.
bool well_conditioned(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return true;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const double hi = es.eigenvalues().maxCoeff();
  const double lo = es.eigenvalues().minCoeff();
  return hi > 0.0 && lo > 1e-12 * hi;
}

Factored condition(Eigen::MatrixXd info, double ridge) {
  Factored f;
  if (!well_conditioned(info)) {
    info.diagonal().array() += ridge;
    f.ridged = true;
    f.singular = !well_conditioned(info);
  }
  f.matrix = std::move(info);
  return f;
}

}  // namespace

NewtonOutcome newton_maximize(const ConditionalLikelihood& lik, const Eigen::VectorXd& penalty,
                              const MleOptions& options) {
  const Eigen::Index p = lik.dimension();
  auto objective = [&](const Eigen::VectorXd& theta, bool hess) {
    auto e = lik.evaluate(theta, hess);
    e.value -= 0.5 * theta.dot(penalty.cwiseProduct(theta));
    e.gradient -= penalty.cwiseProduct(theta);
    if (hess) e.hessian.diagonal() -= penalty;
    return e;
  };

  NewtonOutcome out;
  out.theta = Eigen::VectorXd::Zero(p);
  auto& diag = out.diagnostics;
  if (p == 0) {
    diag.converged = true;
    return out;
  }

  auto current = objective(out.theta, true);
  for (diag.iterations = 0; diag.iterations < options.max_iter; ++diag.iterations) {
    diag.gradient_norm = current.gradient.lpNorm<Eigen::Infinity>();
    const auto info = condition(-current.hessian, options.ridge);
    if (info.singular) {
      throw NumericalError("information matrix singular even after ridge " +
                           std::to_string(options.ridge));
    }
    diag.ridge_used = diag.ridge_used || info.ridged;
    const Eigen::VectorXd step = info.matrix.ldlt().solve(current.gradient);
    if (diag.gradient_norm <= options.tolerance &&
        (step.lpNorm<Eigen::Infinity>() <= std::sqrt(options.tolerance) || info.ridged)) {
      diag.converged = true;
      out.information = info.ridged ? Eigen::MatrixXd(-current.hessian) : info.matrix;
      if (info.ridged) diag.ridge_used = true;
      return out;
    }
    double t = 1.0;
    Eigen::VectorXd candidate = out.theta + step;
    double value = objective(candidate, false).value;
    const double floor = current.value - 1e-12 * (1.0 + std::abs(current.value));
    for (int halving = 0; halving < 60 && !(value >= floor); ++halving) {
      t *= 0.5;
      candidate = out.theta + t * step;
      value = objective(candidate, false).value;
    }
    out.theta = candidate;
    current = objective(out.theta, true);
    if (out.theta.lpNorm<Eigen::Infinity>() > options.separation_bound) break;
  }
  diag.gradient_norm = current.gradient.lpNorm<Eigen::Infinity>();
  out.information = -current.hessian;
  return out;
}

}  // namespace detail

namespace {

std::string block_of(const ConditionalLikelihood& lik, Eigen::Index column) {
  for (const auto& b : lik.blocks()) {
    if (column >= b.begin && column < b.begin + b.size) return b.name;
  }
  return "?";
}

}  // namespace

FitResult fit_mle(const ConditionalLikelihood& lik, const MleOptions& options) {
  const Eigen::Index p = lik.dimension();
  if (lik.sets() == 0) throw EmptyAnalysisError("no matched sets to fit");

  const auto zero_info = lik.zero_information_columns();
  std::vector<int> active;
  for (int k = 0; k < p; ++k) {
    if (!std::binary_search(zero_info.begin(), zero_info.end(), k)) active.push_back(k);
  }
  const auto sub = lik.restricted(active);
  const Eigen::VectorXd scale = sub.column_scale();
  const auto standardized = sub.rescaled(scale);
  const Eigen::VectorXd no_penalty = Eigen::VectorXd::Zero(sub.dimension());

  auto outcome = detail::newton_maximize(standardized, no_penalty, options);
  const auto& theta = outcome.theta;

  Eigen::Index worst = 0;
  if (theta.size() > 0 && theta.cwiseAbs().maxCoeff(&worst) > options.separation_bound) {
    const auto col = active[static_cast<std::size_t>(worst)];
    throw SeparationError("likelihood unbounded: coefficient '" + lik.labels()[col] +
                              "' diverges (block " + block_of(lik, col) + ")",
                          block_of(lik, col));
  }
  if (outcome.diagnostics.converged && outcome.diagnostics.ridge_used &&
      !detail::well_conditioned(outcome.information)) {
    // Flat direction at the optimum. If it was already flat at zero the
    // columns are collinear; otherwise the likelihood only levels off at
    // infinity along it.
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(standardized.dimension());
    if (!detail::well_conditioned(-standardized.hessian(zero))) {
      throw NumericalError("information matrix singular: design columns are collinear");
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(outcome.information);
    Eigen::Index dir = 0;
    es.eigenvectors().col(0).cwiseAbs().maxCoeff(&dir);
    const auto col = active[static_cast<std::size_t>(dir)];
    throw SeparationError("likelihood flat at the optimum along block " + block_of(lik, col) +
                              " (quasi-separation)",
                          block_of(lik, col));
  }

  FitResult fit;
  fit.mode = FitMode::mle;
  fit.labels = lik.labels();
  fit.blocks = lik.blocks();
  fit.mle = outcome.diagnostics;
  fit.mle.zero_information = zero_info;
  fit.point = Eigen::VectorXd::Zero(p);
  fit.covariance = Eigen::MatrixXd::Zero(p, p);
  for (int k : zero_info) fit.covariance(k, k) = std::numeric_limits<double>::infinity();
  if (!active.empty()) {
    const Eigen::VectorXd beta = theta.cwiseQuotient(scale);
    const Eigen::MatrixXd cov_std = outcome.information.ldlt().solve(
        Eigen::MatrixXd::Identity(theta.size(), theta.size()));
    const Eigen::MatrixXd cov =
        scale.cwiseInverse().asDiagonal() * cov_std * scale.cwiseInverse().asDiagonal();
    for (std::size_t i = 0; i < active.size(); ++i) {
      fit.point[active[i]] = beta[static_cast<Eigen::Index>(i)];
      for (std::size_t j = 0; j < active.size(); ++j) {
        fit.covariance(active[i], active[j]) =
            cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
  }
  return fit;
}

}  // namespace ccx
